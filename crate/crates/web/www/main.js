import init, {
  endmemberSpectra, warpSpectrum, mixSpectrum, aggregateSpectrum, sceneTruthRgba,
} from "./pkg/barkscan_web.js";

const BANDS = 234;
const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const status = $("status");

function fail(err) {
  status.textContent = String(err.message ?? err);
  status.className = "error";
}

function plot(canvas, series, yMax) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  const pad = 8;
  for (const { values, color, step } of series) {
    const n = values.length;
    ctx.strokeStyle = color;
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    values.forEach((v, i) => {
      const y = h - pad - (v / yMax) * (h - 2 * pad);
      const x0 = pad + (i / n) * (w - 2 * pad);
      const x1 = pad + ((i + 1) / n) * (w - 2 * pad);
      if (step) {
        i === 0 ? ctx.moveTo(x0, y) : ctx.lineTo(x0, y);
        ctx.lineTo(x1, y);
      } else {
        const xc = (x0 + x1) / 2;
        i === 0 ? ctx.moveTo(xc, y) : ctx.lineTo(xc, y);
      }
    });
    ctx.stroke();
  }
}

function drawWarp() {
  try {
    const healthy = endmemberSpectra(BANDS, 1, 0).slice(0, BANDS);
    const warped = warpSpectrum(
      healthy, num("w-amin"), num("w-amax"), num("w-s1"), num("w-s2"), num("w-knots"), num("w-seed"),
    );
    plot($("w-plot"), [
      { values: healthy, color: "#999" },
      { values: warped, color: "#2a7" },
    ], 1.2);
    status.textContent = "";
  } catch (e) { fail(e); }
}

function drawMix() {
  try {
    const out = mixSpectrum(num("m-h"), num("m-a"), num("m-d"), BANDS, num("m-nf"), 0);
    const weights = out.slice(0, 3);
    const spectrum = out.slice(3);
    const agg = aggregateSpectrum(spectrum, num("m-win"));
    $("m-weights").textContent =
      `normalized: healthy ${weights[0].toFixed(3)}, affected ${weights[1].toFixed(3)}, dead ${weights[2].toFixed(3)}`;
    plot($("m-plot"), [
      { values: agg, color: "#c70", step: true },
      { values: spectrum, color: "#235" },
    ], 1.2);
    status.textContent = "";
  } catch (e) { fail(e); }
}

function drawScene() {
  try {
    const size = num("s-size");
    const rgba = sceneTruthRgba(size, size, num("s-pure"), num("s-seed"));
    const canvas = $("s-map");
    canvas.width = size;
    canvas.height = size;
    canvas.getContext("2d").putImageData(new ImageData(new Uint8ClampedArray(rgba), size, size), 0, 0);
    status.textContent = "";
  } catch (e) { fail(e); }
}

await init();
status.textContent = "";
for (const id of ["w-amin", "w-amax", "w-s1", "w-s2", "w-knots", "w-seed"]) $(id).addEventListener("input", drawWarp);
$("w-next").addEventListener("click", () => { $("w-seed").value = num("w-seed") + 1; drawWarp(); });
for (const id of ["m-h", "m-a", "m-d", "m-win", "m-nf"]) $(id).addEventListener("input", drawMix);
$("s-go").addEventListener("click", drawScene);
drawWarp();
drawMix();
drawScene();
