import init, { preset, pid, stripes, gaussian } from "./pkg/pcvae_demo.js";

const $ = (id) => document.getElementById(id);

function attempt(errorId, fn) {
  $(errorId).textContent = "";
  try {
    fn();
  } catch (e) {
    $(errorId).textContent = e.message ?? String(e);
  }
}

function table(el, rows) {
  el.innerHTML = rows.map(([k, v]) => `<tr><td>${k}</td><td>${v}</td></tr>`).join("");
}

const bits = (v) => `${v >= 0 ? "+" : ""}${v.toFixed(6)} bits`;

function decompose() {
  attempt("pid-error", () => {
    const r = JSON.parse(pid($("joint").value));
    table($("pid-out"), [
      ["I(X1,X2;Y)", bits(r.total)],
      ["unique X1", bits(r.unique1)],
      ["unique X2", bits(r.unique2)],
      ["redundancy", bits(r.redundancy)],
      ["synergy", bits(r.synergy)],
      ["interaction information", bits(r.interaction)],
      ["synergy - redundancy", bits(r.interaction_sr)],
    ]);
  });
}

function heat(canvas, rows) {
  const h = rows.length;
  const w = rows[0].length;
  canvas.width = w;
  canvas.height = h;
  const flat = rows.flat();
  const lo = Math.min(...flat);
  const hi = Math.max(...flat);
  const img = canvas.getContext("2d").createImageData(w, h);
  flat.forEach((v, i) => {
    const t = hi > lo ? (v - lo) / (hi - lo) : 0.5;
    img.data.set([255 * t, 80 + 100 * (1 - Math.abs(2 * t - 1)), 255 * (1 - t), 255], 4 * i);
  });
  canvas.getContext("2d").putImageData(img, 0, 0);
}

function tokenize() {
  attempt("stripe-error", () => {
    const r = JSON.parse(stripes(Number($("seed").value), Number($("stripes").value), Number($("code-len").value)));
    const ctx = $("image").getContext("2d");
    const img = ctx.createImageData(r.side, r.side);
    img.data.set(r.rgba);
    ctx.putImageData(img, 0, 0);
    heat($("tokens"), r.tokens);
    $("tokens").style.height = `${Math.max(24, 12 * r.tokens.length)}px`;
    heat($("mu"), [r.mu]);
    $("stripe-info").textContent =
      `${r.tokens.length} tokens of ${r.token_len} values (${r.block}-column blocks, column-major), ` +
      `code of ${r.mu.length}; reassembly ${r.roundtrip_exact ? "exact" : "differs"}`;
  });
}

function estimate() {
  const rho = Number($("rho").value);
  $("rho-val").textContent = rho.toFixed(2);
  attempt("mi-error", () => {
    const r = JSON.parse(gaussian(rho, Number($("n").value), 1));
    table($("mi-out"), [
      ["estimate", `${r.estimate.toFixed(6)} nats`],
      ["-&frac12; ln(1 - &rho;&sup2;)", `${r.exact.toFixed(6)} nats`],
      ["relative error", `${((100 * Math.abs(r.estimate - r.exact)) / Math.max(r.exact, 1e-12)).toFixed(2)}%`],
    ]);
    const c = $("scatter");
    const ctx = c.getContext("2d");
    ctx.clearRect(0, 0, c.width, c.height);
    ctx.fillStyle = "rgba(30, 80, 160, 0.5)";
    const s = c.width / 8;
    for (const [x, y] of r.points) {
      ctx.fillRect(c.width / 2 + s * x, c.height / 2 - s * y, 2, 2);
    }
  });
}

await init();
for (const b of document.querySelectorAll("button[data-case]")) {
  b.addEventListener("click", () => {
    $("joint").value = preset(b.dataset.case);
    decompose();
  });
}
$("decompose").addEventListener("click", decompose);
$("tokenize").addEventListener("click", tokenize);
for (const id of ["seed", "stripes", "code-len"]) {
  $(id).addEventListener("change", tokenize);
}
$("rho").addEventListener("input", estimate);
$("n").addEventListener("change", estimate);

$("joint").value = preset("xor");
decompose();
tokenize();
estimate();
