import init, { Demo } from "./pkg/mugtrack_web.js";

const $ = (id) => document.getElementById(id);
const view = $("view");
const ctx = view.getContext("2d");

let demo = null;
let clicks = [];
let overlay = null; // { kind: "selection" } or { kind: "track", index }

function num(id) {
  return Number($(id).value);
}

function status(text) {
  $("status").textContent = text;
}

function frame() {
  return num("frame");
}

function draw() {
  if (!demo) return;
  const w = demo.width(), h = demo.height();
  const img = new ImageData(new Uint8ClampedArray(demo.frame_rgba(frame())), w, h);
  let mask = null;
  if (overlay?.kind === "selection") mask = demo.selection();
  if (overlay?.kind === "track") mask = demo.track_mask(overlay.index, frame());
  if (mask && mask.length) {
    for (let i = 0; i < mask.length; i++) {
      if (!mask[i]) continue;
      const p = i * 4;
      img.data[p] = (img.data[p] + 255) >> 1;
      img.data[p + 1] = (img.data[p + 1] + 255) >> 1;
      img.data[p + 2] = img.data[p + 2] >> 1;
    }
  }
  ctx.putImageData(img, 0, 0);
  for (const c of clicks) {
    ctx.fillStyle = c.label ? "#0c0" : "#e00";
    ctx.fillRect(c.x - 0.5, c.y - 0.5, 1, 1);
  }
}

function generate() {
  try {
    demo = new Demo(BigInt(num("seed")), num("shapes"), num("frames"), num("size"));
  } catch (e) {
    status(String(e));
    return;
  }
  view.width = demo.width();
  view.height = demo.height();
  $("frame").max = demo.frames();
  $("frame").value = 1;
  $("frame-label").textContent = "1";
  $("tracks").hidden = true;
  clicks = [];
  overlay = null;
  status(`${demo.regions()} regions over ${demo.frames()} frames`);
  draw();
}

function segment() {
  if (!clicks.length) {
    overlay = null;
    draw();
    return;
  }
  try {
    const found = JSON.parse(
      demo.click(
        frame(),
        Float64Array.from(clicks, (c) => c.x),
        Float64Array.from(clicks, (c) => c.y),
        Uint8Array.from(clicks, (c) => c.label),
      ),
    );
    overlay = { kind: "selection" };
    status(found.length ? found.map((c) => `${c.region} (${c.area} px)`).join(", ") : "no region matches these clicks");
  } catch (e) {
    status(String(e));
  }
  draw();
}

function collect() {
  if (!demo) return;
  status("collecting...");
  let summary;
  try {
    summary = JSON.parse(demo.collect(num("gamma"), num("points"), BigInt(num("seed"))));
  } catch (e) {
    status(String(e));
    return;
  }
  const body = $("tracks").querySelector("tbody");
  body.replaceChildren();
  summary.tracks.forEach((t, index) => {
    const row = body.insertRow();
    row.className = t.kept ? "" : "dropped";
    for (const v of [t.track_id, t.kept ? "yes" : "no", t.min_step_iou.toFixed(3), t.matched ?? "-", t.jf?.toFixed(3) ?? "-"]) {
      row.insertCell().textContent = v;
    }
    row.onclick = () => {
      body.querySelectorAll("tr").forEach((r) => r.classList.remove("active"));
      row.classList.add("active");
      overlay = { kind: "track", index };
      clicks = [];
      draw();
    };
  });
  $("tracks").hidden = false;
  status(`${summary.kept} of ${summary.tracks.length} tracks kept at gamma ${summary.gamma}; ` +
    `${summary.regions} ground-truth regions; J&F ${summary.dataset_jf.toFixed(3)}`);
  draw();
}

view.addEventListener("click", (ev) => {
  if (!demo) return;
  const r = view.getBoundingClientRect();
  const x = Math.floor(((ev.clientX - r.left) / r.width) * demo.width());
  const y = Math.floor(((ev.clientY - r.top) / r.height) * demo.height());
  clicks.push({ x, y, label: ev.shiftKey ? 0 : 1 });
  segment();
});

$("frame").addEventListener("input", () => {
  $("frame-label").textContent = frame();
  clicks = [];
  if (overlay?.kind === "selection") overlay = null;
  draw();
});
$("clear").onclick = () => {
  clicks = [];
  overlay = null;
  draw();
};
$("generate").onclick = generate;
$("collect").onclick = collect;

await init();
generate();
