import { drawHeatmap } from "./heatmap.js";
import { PickerStore } from "./state.js";
import type { PickerState } from "./state.js";
import type { Point } from "./types.js";

const MAX_STAGE_WIDTH = 480;
const PREVIEW_WIDTH = 168;

/** Wire the picker store to the page. Returns the root for tests. */
export function mountPicker(root: HTMLElement, store: PickerStore): void {
  root.innerHTML = `
    <header>
      <h1>Focal point picker</h1>
      <label class="file">
        Upload image
        <input type="file" id="file" accept="image/png,image/jpeg" />
      </label>
    </header>
    <p id="status" role="status"></p>
    <p id="error" class="error" role="alert" hidden></p>
    <section class="workbench" hidden id="workbench">
      <div class="stage-panel">
        <div class="stage" id="stage">
          <img id="photo" alt="uploaded image" />
          <canvas id="heatmap"></canvas>
          <div id="markers"></div>
          <div id="cross" class="cross" hidden></div>
        </div>
        <label class="slider">
          Heat-map opacity
          <input type="range" id="opacity" min="0" max="100" value="45" />
        </label>
        <form id="point-form" class="point-form">
          <label>x <input type="number" id="px" min="0" value="0" /></label>
          <label>y <input type="number" id="py" min="0" value="0" /></label>
          <button type="submit">Set focal point</button>
        </form>
        <div class="confirm-row">
          <button id="confirm" disabled>Confirm selection</button>
          <span id="confirmed" class="confirmed" hidden>selection saved</span>
        </div>
      </div>
      <div class="previews" id="previews"></div>
    </section>
  `;

  const byId = <T extends HTMLElement>(id: string): T =>
    root.querySelector(`#${id}`) as T;

  const fileInput = byId<HTMLInputElement>("file");
  const status = byId<HTMLParagraphElement>("status");
  const errorBanner = byId<HTMLParagraphElement>("error");
  const workbench = byId<HTMLElement>("workbench");
  const stage = byId<HTMLDivElement>("stage");
  const photo = byId<HTMLImageElement>("photo");
  const heatmap = byId<HTMLCanvasElement>("heatmap");
  const markers = byId<HTMLDivElement>("markers");
  const cross = byId<HTMLDivElement>("cross");
  const opacity = byId<HTMLInputElement>("opacity");
  const pointForm = byId<HTMLFormElement>("point-form");
  const px = byId<HTMLInputElement>("px");
  const py = byId<HTMLInputElement>("py");
  const confirmBtn = byId<HTMLButtonElement>("confirm");
  const confirmedTag = byId<HTMLSpanElement>("confirmed");
  const previews = byId<HTMLDivElement>("previews");

  let objectUrl: string | null = null;
  let scale = 1;

  fileInput.addEventListener("change", () => {
    const file = fileInput.files?.[0];
    if (!file) return;
    if (objectUrl) URL.revokeObjectURL(objectUrl);
    objectUrl = URL.createObjectURL(file);
    photo.src = objectUrl;
    void store.upload(file);
  });

  opacity.addEventListener("input", () => {
    heatmap.style.opacity = String(Number(opacity.value) / 100);
  });

  stage.addEventListener("click", (ev) => {
    const size = store.state.imageSize;
    if (!size || ev.target instanceof HTMLButtonElement) return;
    const bounds = stage.getBoundingClientRect();
    const point: Point = {
      x: Math.floor((ev.clientX - bounds.left) / scale),
      y: Math.floor((ev.clientY - bounds.top) / scale),
    };
    void store.pickPoint(point);
  });

  pointForm.addEventListener("submit", (ev) => {
    ev.preventDefault();
    void store.pickPoint({ x: Number(px.value), y: Number(py.value) });
  });

  confirmBtn.addEventListener("click", () => void store.confirm());

  function renderMarkers(state: PickerState): void {
    markers.innerHTML = "";
    state.candidates.forEach((candidate, index) => {
      const btn = document.createElement("button");
      btn.className = "marker";
      btn.style.left = `${candidate.point.x * scale}px`;
      btn.style.top = `${candidate.point.y * scale}px`;
      btn.title = `candidate ${index + 1}, score ${candidate.score.toFixed(2)}`;
      btn.setAttribute("aria-label", btn.title);
      btn.textContent = String(index + 1);
      btn.addEventListener("click", () => store.pickCandidate(index));
      markers.append(btn);
    });
  }

  function renderPreviews(state: PickerState): void {
    previews.innerHTML = "";
    if (state.previewsPending) {
      previews.textContent = "loading previews…";
      return;
    }
    for (const preview of state.previews) {
      const card = document.createElement("figure");
      card.className = "preview";
      const canvas = document.createElement("canvas");
      const { rect } = preview;
      canvas.width = PREVIEW_WIDTH;
      canvas.height = Math.max(1, Math.round((PREVIEW_WIDTH * rect.h) / rect.w));
      const ctx = canvas.getContext("2d");
      if (ctx && photo.complete && photo.naturalWidth > 0) {
        ctx.drawImage(photo, rect.x, rect.y, rect.w, rect.h,
          0, 0, canvas.width, canvas.height);
      }
      const caption = document.createElement("figcaption");
      caption.textContent =
        `${preview.ar} — (${rect.x}, ${rect.y}) ${rect.w}x${rect.h}`;
      card.append(canvas, caption);
      previews.append(card);
    }
  }

  store.subscribe((state) => {
    workbench.hidden = state.phase === "empty" || state.phase === "loading";
    status.textContent =
      state.phase === "loading" ? "analyzing image…"
      : state.phase === "ready" && state.symmetric
        ? "image is horizontally symmetric: a center crop applies to every ratio"
      : state.phase === "ready" ? "pick a candidate marker or click anywhere"
      : "";
    errorBanner.hidden = !state.error;
    errorBanner.textContent = state.error ?? "";

    if (state.phase === "ready" && state.imageSize) {
      scale = Math.min(1, MAX_STAGE_WIDTH / state.imageSize.w);
      stage.style.width = `${state.imageSize.w * scale}px`;
      stage.style.height = `${state.imageSize.h * scale}px`;
      photo.style.width = "100%";
      if (state.saliency) drawHeatmap(heatmap, state.saliency);
      heatmap.style.opacity = String(Number(opacity.value) / 100);
      px.max = String(state.imageSize.w - 1);
      py.max = String(state.imageSize.h - 1);
      renderMarkers(state);
    }

    if (state.selected) {
      cross.hidden = false;
      cross.style.left = `${state.selected.x * scale}px`;
      cross.style.top = `${state.selected.y * scale}px`;
    } else {
      cross.hidden = true;
    }

    confirmBtn.disabled = !store.canConfirm;
    confirmedTag.hidden = !state.confirmed;
    renderPreviews(state);
  });
}
