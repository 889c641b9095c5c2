// Expects the wasm-bindgen output (--target web) in ./pkg.
import init, { spectrum, husimiMap, jointNoiseCurve } from "./pkg/toeplitz_demo.js";

const $ = (id) => document.getElementById(id);

function guarded(errId, fn) {
  return () => {
    $(errId).textContent = "";
    try {
      fn();
    } catch (e) {
      $(errId).textContent = String(e);
    }
  };
}

function drawSpectrum() {
  const ev = spectrum($("sp-f").value, Number($("sp-k").value));
  const c = $("sp-canvas"), g = c.getContext("2d");
  g.clearRect(0, 0, c.width, c.height);
  const lo = Math.min(...ev), hi = Math.max(...ev);
  const span = hi - lo || 1;
  const x = (v) => 20 + ((v - lo) / span) * (c.width - 40);
  g.strokeStyle = "#888";
  g.beginPath(); g.moveTo(20, 90); g.lineTo(c.width - 20, 90); g.stroke();
  g.strokeStyle = "#1f4e9c";
  for (const v of ev) {
    g.beginPath(); g.moveTo(x(v), 30); g.lineTo(x(v), 90); g.stroke();
  }
  g.fillStyle = "#000";
  g.fillText(lo.toFixed(4), 20, 108);
  g.fillText(hi.toFixed(4), c.width - 70, 108);
}

function drawHusimi() {
  const c = $("hu-canvas"), g = c.getContext("2d");
  const nLat = 90, nLon = 180;
  const m = husimiMap($("hu-f").value, Number($("hu-k").value), Number($("hu-i").value), nLat, nLon);
  const img = g.createImageData(nLon, nLat);
  for (let i = 0; i < m.length; i++) {
    const v = Math.sqrt(m[i]);
    img.data[4 * i] = 255 * v;
    img.data[4 * i + 1] = 255 * v * v;
    img.data[4 * i + 2] = 80 + 100 * (1 - v);
    img.data[4 * i + 3] = 255;
  }
  const tmp = new OffscreenCanvas(nLon, nLat);
  tmp.getContext("2d").putImageData(img, 0, 0);
  g.imageSmoothingEnabled = true;
  g.drawImage(tmp, 0, 0, c.width, c.height);
}

function drawJointNoise() {
  const ks = $("jn-ks").value.split(",").map((s) => Number(s.trim())).filter((k) => k > 0);
  const out = jointNoiseCurve($("jn-f").value, $("jn-g").value, Number($("jn-p").value),
    Number($("jn-q").value), Number($("jn-r").value), Number($("jn-R").value), Uint32Array.from(ks));
  const pts = [];
  for (let i = 0; i < out.length; i += 3) pts.push({ k: out[i], up: out[i + 1], lo: out[i + 2] });
  const c = $("jn-canvas"), g = c.getContext("2d");
  g.clearRect(0, 0, c.width, c.height);
  const lx = pts.map((p) => Math.log(p.k));
  const ly = pts.flatMap((p) => [p.up, p.lo]).filter((v) => v > 0).map(Math.log);
  const [x0, x1] = [Math.min(...lx), Math.max(...lx)];
  const [y0, y1] = [Math.min(...ly), Math.max(...ly)];
  const X = (k) => 50 + ((Math.log(k) - x0) / (x1 - x0 || 1)) * (c.width - 80);
  const Y = (v) => c.height - 30 - ((Math.log(v) - y0) / (y1 - y0 || 1)) * (c.height - 60);
  for (const [key, color] of [["up", "#1f4e9c"], ["lo", "#c0392b"]]) {
    g.strokeStyle = color; g.fillStyle = color;
    g.beginPath();
    pts.filter((p) => p[key] > 0).forEach((p, i) => (i ? g.lineTo(X(p.k), Y(p[key])) : g.moveTo(X(p.k), Y(p[key]))));
    g.stroke();
    for (const p of pts) if (p[key] > 0) g.fillRect(X(p.k) - 2, Y(p[key]) - 2, 4, 4);
  }
  g.fillStyle = "#000";
  g.fillText("log-log: upper proxy (blue), lower proxy (red) against k", 50, 16);
  for (const p of pts) g.fillText(String(p.k), X(p.k) - 6, c.height - 10);
}

await init();
$("sp-go").onclick = guarded("sp-err", drawSpectrum);
$("hu-go").onclick = guarded("hu-err", drawHusimi);
$("jn-go").onclick = guarded("jn-err", drawJointNoise);
