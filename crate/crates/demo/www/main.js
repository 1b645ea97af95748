import init, { widthSweep, rateProbe, lassoCompare } from "./pkg/noisereg_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const COLORS = ["#c0392b", "#2471a3", "#239b56", "#9b59b6"];

// Line plot of several series sharing x; log axes optional. Non-positive values are skipped on log axes.
function plot(canvas, xs, series, { logX = false, logY = false, xLabel = "", yLabel = "" } = {}) {
  const ctx = canvas.getContext("2d");
  const W = canvas.width, H = canvas.height, m = { l: 70, r: 160, t: 12, b: 40 };
  ctx.clearRect(0, 0, W, H);
  const tx = (v) => (logX ? Math.log10(v) : v);
  const ty = (v) => (logY ? Math.log10(v) : v);
  const ok = (v) => Number.isFinite(v) && (!logY || v > 0);
  const ys = series.flatMap((s) => s.values.filter(ok).map(ty));
  if (ys.length === 0) return;
  const [x0, x1] = [Math.min(...xs.map(tx)), Math.max(...xs.map(tx))];
  let [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  if (y0 === y1) { y0 -= 1; y1 += 1; }
  const px = (v) => m.l + ((tx(v) - x0) / (x1 - x0 || 1)) * (W - m.l - m.r);
  const py = (v) => H - m.b - ((ty(v) - y0) / (y1 - y0)) * (H - m.t - m.b);

  ctx.strokeStyle = "#999"; ctx.fillStyle = "#444"; ctx.font = "12px system-ui";
  ctx.strokeRect(m.l, m.t, W - m.l - m.r, H - m.t - m.b);
  ctx.textAlign = "center";
  xs.forEach((x) => ctx.fillText(logX ? x.toExponential(0) : String(x), px(x), H - m.b + 15));
  ctx.fillText(xLabel, m.l + (W - m.l - m.r) / 2, H - 6);
  ctx.textAlign = "right";
  for (let i = 0; i <= 4; i++) {
    const v = y0 + (i / 4) * (y1 - y0);
    const label = logY ? "1e" + v.toFixed(1) : v.toPrecision(3);
    ctx.fillText(label, m.l - 5, H - m.b - (i / 4) * (H - m.t - m.b) + 4);
  }
  ctx.save(); ctx.translate(14, m.t + (H - m.t - m.b) / 2); ctx.rotate(-Math.PI / 2);
  ctx.textAlign = "center"; ctx.fillText(yLabel, 0, 0); ctx.restore();

  series.forEach((s, k) => {
    ctx.strokeStyle = ctx.fillStyle = s.color ?? COLORS[k % COLORS.length];
    ctx.beginPath();
    let pen = false;
    s.values.forEach((v, i) => {
      if (!ok(v)) { pen = false; return; }
      if (pen) ctx.lineTo(px(xs[i]), py(v)); else ctx.moveTo(px(xs[i]), py(v));
      pen = true;
      ctx.fillRect(px(xs[i]) - 2, py(v) - 2, 4, 4);
    });
    ctx.stroke();
    ctx.textAlign = "left";
    ctx.fillText(s.name, W - m.r + 10, m.t + 14 + 16 * k);
  });
}

function barPlot(canvas, a, b, names) {
  const ctx = canvas.getContext("2d");
  const W = canvas.width, H = canvas.height, m = { l: 50, r: 160, t: 12, b: 25 };
  ctx.clearRect(0, 0, W, H);
  const top = Math.max(1e-12, ...a.map(Math.abs), ...b.map(Math.abs));
  const zero = m.t + (H - m.t - m.b) / 2;
  const scale = (H - m.t - m.b) / 2 / top;
  const slot = (W - m.l - m.r) / a.length;
  ctx.strokeStyle = "#999"; ctx.beginPath(); ctx.moveTo(m.l, zero); ctx.lineTo(W - m.r, zero); ctx.stroke();
  ctx.font = "12px system-ui"; ctx.textAlign = "center";
  a.forEach((v, j) => {
    const x = m.l + j * slot;
    ctx.fillStyle = COLORS[0]; ctx.fillRect(x + slot * 0.15, zero, slot * 0.3, -v * scale);
    ctx.fillStyle = COLORS[1]; ctx.fillRect(x + slot * 0.5, zero, slot * 0.3, -b[j] * scale);
    ctx.fillStyle = "#444"; ctx.fillText(`β${j + 1}`, x + slot / 2, H - 6);
  });
  ctx.textAlign = "left";
  names.forEach((n, k) => { ctx.fillStyle = COLORS[k]; ctx.fillText(n, W - m.r + 10, m.t + 14 + 16 * k); });
}

// Lets the status text paint before a blocking call.
const later = (f) =>
  new Promise((res, rej) => setTimeout(() => { try { res(f()); } catch (e) { rej(e); } }, 20));

function guard(outId, f) {
  return async () => {
    $(outId).textContent = "running…";
    try { await later(f); } catch (e) { $(outId).textContent = "error: " + e.message; }
  };
}

function runSweep() {
  const grid = new Uint32Array($("sw-grid").value.split(",").map((s) => Number(s.trim())).filter((v) => v > 0));
  const r = widthSweep($("sw-family").value === "relu", num("sw-sigma"), 20, 10, grid, num("sw-seeds"), num("sw-mc"), 1);
  const d1 = Array.from(r.d1), risk = Array.from(r.risk);
  const full = Array.from(r.fullMean).map((v, i) => v - risk[i]);
  const layer = Array.from(r.layerwiseMean).map((v, i) => v - risk[i]);
  plot($("sw-plot"), d1, [{ name: "full noise", values: full }, { name: "layer-wise noise", values: layer }],
       { xLabel: "hidden width d1", yLabel: "expected loss − loss" });
  const se = Array.from(r.fullSe), sl = Array.from(r.layerwiseSe);
  $("sw-out").textContent = d1.map((d, i) =>
    `d1=${d}\tfull ${full[i].toExponential(3)} ± ${se[i].toExponential(1)}\tlayer-wise ${layer[i].toExponential(3)} ± ${sl[i].toExponential(1)}`).join("\n");
}

const RATE_NAMES = ["smoothed − loss", "smoothed − effective", "minimizer vs interpolant", "effective vs smoothed minimizer"];

function runRates() {
  const r = rateProbe(5, 10, num("rt-lo"), num("rt-hi"), num("rt-k"), num("rt-seed"));
  const sig = Array.from(r.sigmas);
  plot($("rt-plot"), sig, RATE_NAMES.map((name, k) => ({ name, values: Array.from(r.series(k)) })),
       { logX: true, logY: true, xLabel: "σ", yLabel: "gap" });
  const slopes = Array.from(r.slopes);
  $("rt-out").textContent = RATE_NAMES.map((n, k) =>
    `${n}: slope ${Number.isFinite(slopes[k]) ? slopes[k].toFixed(3) : "undefined (gaps vanish)"}`).join("\n");
}

function runLasso() {
  $("ls-sigma-v").textContent = num("ls-sigma").toFixed(2);
  const r = lassoCompare(num("ls-n"), num("ls-d"), num("ls-sigma"), 5, num("ls-seed"));
  barPlot($("ls-plot"), Array.from(r.betaNetwork), Array.from(r.betaLasso), ["noise-trained network", "weighted Lasso"]);
  $("ls-out").textContent = `max |Δβ| = ${r.linf.toExponential(2)}, objective gap = ${r.objectiveGap.toExponential(2)}`;
}

await init();
$("sw-run").onclick = guard("sw-out", runSweep);
$("rt-run").onclick = guard("rt-out", runRates);
for (const id of ["ls-sigma", "ls-n", "ls-d", "ls-seed"]) $(id).oninput = guard("ls-out", runLasso);
guard("sw-out", runSweep)();
guard("ls-out", runLasso)();
