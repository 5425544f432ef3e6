import init, { preset, simulate, compareModes, refine } from "./pkg/mmrac_web.js";

const MAX_POINTS = 1500;
const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];
const $ = (id) => document.getElementById(id);

function status(text, error = false) {
  $("status").textContent = text;
  $("status").className = error ? "error" : "";
}

// Yield to the browser so the status line paints before a long run.
function busy(label, work) {
  status(label + " ...");
  setTimeout(() => {
    const start = performance.now();
    try {
      work();
      status(`${label} done in ${((performance.now() - start) / 1000).toFixed(2)} s`);
    } catch (e) {
      status(String(e.message ?? e), true);
    }
  }, 20);
}

function plot(canvas, title, t, curves) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = { l: 56, r: 120, t: 24, b: 30 };
  ctx.clearRect(0, 0, w, h);
  let lo = Infinity, hi = -Infinity;
  for (const c of curves) for (const y of c.y) if (Number.isFinite(y)) { lo = Math.min(lo, y); hi = Math.max(hi, y); }
  if (!Number.isFinite(lo)) { lo = 0; hi = 1; }
  if (hi - lo < 1e-12) { lo -= 0.5; hi += 0.5; }
  const t0 = t[0] ?? 0, t1 = t[t.length - 1] ?? 1, span = t1 > t0 ? t1 - t0 : 1;
  const sx = (x) => pad.l + ((x - t0) / span) * (w - pad.l - pad.r);
  const sy = (y) => pad.t + ((hi - y) / (hi - lo)) * (h - pad.t - pad.b);

  ctx.font = "12px sans-serif";
  ctx.fillStyle = "#222";
  ctx.fillText(title, pad.l, 16);
  ctx.strokeStyle = "#ddd";
  for (let i = 0; i <= 4; i++) {
    const x = t0 + (i / 4) * span, y = lo + (i / 4) * (hi - lo);
    ctx.beginPath(); ctx.moveTo(sx(x), pad.t); ctx.lineTo(sx(x), h - pad.b); ctx.stroke();
    ctx.beginPath(); ctx.moveTo(pad.l, sy(y)); ctx.lineTo(w - pad.r, sy(y)); ctx.stroke();
    ctx.fillText(x.toPrecision(3), sx(x) - 12, h - pad.b + 14);
    ctx.fillText(y.toPrecision(3), 4, sy(y) + 4);
  }
  ctx.strokeStyle = "#444";
  ctx.strokeRect(pad.l, pad.t, w - pad.l - pad.r, h - pad.t - pad.b);
  curves.forEach((c, i) => {
    ctx.strokeStyle = COLORS[i % COLORS.length];
    ctx.beginPath();
    let pen = false;
    c.y.forEach((y, k) => {
      if (!Number.isFinite(y)) { pen = false; return; }
      pen ? ctx.lineTo(sx(t[k]), sy(y)) : ctx.moveTo(sx(t[k]), sy(y));
      pen = true;
    });
    ctx.stroke();
    ctx.fillStyle = ctx.strokeStyle;
    ctx.fillText(c.label, w - pad.r + 10, pad.t + 14 + 16 * i);
  });
}

const log10 = (v) => v.map((x) => (x === null ? NaN : Math.log10(Math.max(x, 1e-300))));
const fmt = (x) => (x === null ? "n/a" : Number(x).toExponential(3));

function metricsText(run) {
  const m = run.metrics;
  const failed = run.invariants.filter((c) => !c.passed).map((c) => c.name);
  return [
    `${run.mode}`,
    `  final ||e||          ${fmt(m.final_err_norm)}`,
    `  final ||dTheta||_F   ${fmt(m.final_theta_err_fro)}`,
    `  slope log10||e||/s   ${fmt(m.slope_log10_err_per_s)}`,
    `  peak ||u||           ${fmt(m.peak_control_norm)}`,
    `  min PE alpha1        ${fmt(m.pe_alpha1_min)}`,
    `  invariants           ${failed.length ? "failed: " + failed.join(", ") : "all passed"}`,
  ].join("\n");
}

function showRun(run) {
  plot($("err"), "log10 ||e||", run.t, [{ label: run.mode, y: log10(run.err_norm) }]);
  plot($("weights"), "blending weights", run.t, run.what.map((y, i) => ({ label: `w${i + 1}`, y })));
  $("report").textContent = metricsText(run);
}

function showComparison(c) {
  const a = c.mmrac, b = c.single_model;
  plot($("err"), "log10 ||e||", a.t, [
    { label: "mmrac", y: log10(a.err_norm) },
    { label: "single_model", y: log10(b.err_norm) },
  ]);
  plot($("weights"), "blending weights (mmrac)", a.t, a.what.map((y, i) => ({ label: `w${i + 1}`, y })));
  $("report").textContent = [
    metricsText(a),
    metricsText(b),
    `slope ratio ${fmt(c.slope_ratio)}, identical initial gains: ${c.identical_initial_gains}`,
  ].join("\n\n");
}

function showRefinement(r) {
  const mat = (m) => "[" + m.map((row) => row.map((x) => +x.toPrecision(6)).join(", ")).join("; ") + "]";
  const lines = [`raw corners: ${r.raw_corners}`, `refined corners: ${r.corners.length}`];
  r.corners.forEach((c, i) => {
    lines.push(`corner ${i + 1}`, `  A = ${mat(c.a)}`, `  B = ${mat(c.b)}`,
      `  witness = ${mat([c.witness])}`, `  K = ${mat(c.k)}`, `  L = ${mat(c.l)}`);
  });
  $("report").textContent = lines.join("\n");
}

function loadPreset() {
  $("scenario").value = preset($("preset").value);
}

await init();
loadPreset();
$("preset").addEventListener("change", loadPreset);
$("simulate").addEventListener("click", () =>
  busy("simulate", () => showRun(JSON.parse(simulate($("scenario").value, $("mode").value, +$("tend").value, MAX_POINTS)))));
$("compare").addEventListener("click", () =>
  busy("compare", () => showComparison(JSON.parse(compareModes($("scenario").value, +$("tend").value, MAX_POINTS)))));
$("refine").addEventListener("click", () =>
  busy("refine", () => showRefinement(JSON.parse(refine($("scenario").value)))));
status("ready");
