import init, { explore_zigzag, explore_lower_bound, check_consistency } from "./pkg/timecon_web.js";

const $ = (id) => document.getElementById(id);

const PARAM = { geometric: "gamma", "constant-horizon": "horizon", "fixed-lifetime": "lifetime", hyperbolic: "kappa" };
const DEFAULTS = { geometric: "0.9", "constant-horizon": "2", "fixed-lifetime": "5", hyperbolic: "1" };

function guarded(out, fn) {
  try {
    out.innerHTML = fn();
  } catch (e) {
    out.innerHTML = `<p class="err">${e}</p>`;
  }
}

function track(path) {
  return `<div class="track">${path.map((a) => `<span class="${a}">${a === "up" ? "↑" : "→"}</span>`).join("")}</div>`;
}

function zigzag() {
  const family = $("zz-family").value;
  const raw = $("zz-param").value.trim();
  const value = family === "constant-horizon" || family === "fixed-lifetime" ? Number(raw) : raw;
  const doc = JSON.stringify({ kind: "family", family, [PARAM[family]]: value });
  guarded($("zz-out"), () => {
    const r = JSON.parse(explore_zigzag(Number($("zz-length").value), doc));
    let html = `<p>Plan at time 1 (value ${r.plan.value})</p>${track(r.plan.path)}`;
    html += `<p>What actually gets played (worth ${r.mixed.value} to the first self)</p>${track(r.mixed.path)}`;
    if (r.spe) {
      html += `<p>Lowest-index equilibrium of the first ${r.spe.players} selves (value ${r.spe.value})</p>${track(r.spe.path)}`;
    }
    return html;
  });
}

function lowerBound() {
  guarded($("lb-out"), () => {
    const r = JSON.parse(explore_lower_bound($("lb-delta").value, Number($("lb-t").value), $("lb-eps").value));
    const mark = (ok) => `<span class="${ok ? "ok" : "bad"}">${ok ? "holds" : "fails"}</span>`;
    return `<table>
      <tr><th>optimal value</th><td>${r.v_star}</td></tr>
      <tr><th>played value</th><td>${r.v_mixed}</td></tr>
      <tr><th>regret</th><td>${r.regret}</td></tr>
      <tr><th>closed form</th><td>${r.closed_form}</td></tr>
      <tr><th>continuity bound</th><td>${r.bound}</td></tr>
      <tr><th>upper (t+1)&delta;</th><td>${r.upper} ${mark(r.upper_holds)}</td></tr>
      <tr><th>strict lower (t-2)(1-&epsilon;)&delta;</th><td>${r.stated_lower} ${mark(r.lower_holds)}</td></tr>
    </table>`;
  });
}

function consistency() {
  guarded($("cc-out"), () => {
    const r = JSON.parse(check_consistency($("cc-doc").value, Number($("cc-k").value), Number($("cc-t").value)));
    const rows = r.columns[0].map((_, t) => `<tr><th>t=${t + 1}</th>${r.columns.map((c) => `<td>${c[t] ?? "-"}</td>`).join("")}</tr>`);
    const head = `<tr><th></th>${r.columns.map((_, k) => `<th>k=${k + 1}</th>`).join("")}</tr>`;
    const verdict = r.consistent
      ? `<p class="ok">Time-consistent. Scale factors: ${r.alphas.join(", ")}</p>`
      : `<p class="bad">Inconsistent: column ${r.witness.k} breaks proportionality at t = ${r.witness.t}.</p>`;
    return verdict + `<table>${head}${rows.join("")}</table>`;
  });
}

await init();
$("zz-family").addEventListener("change", () => {
  $("zz-param").value = DEFAULTS[$("zz-family").value];
  zigzag();
});
for (const id of ["zz-length", "zz-param"]) $(id).addEventListener("input", zigzag);
for (const id of ["lb-delta", "lb-t", "lb-eps"]) $(id).addEventListener("input", lowerBound);
for (const id of ["cc-doc", "cc-k", "cc-t"]) $(id).addEventListener("input", consistency);
zigzag();
lowerBound();
consistency();
