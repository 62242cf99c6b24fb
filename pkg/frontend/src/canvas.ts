/** Coordinate mapping between display pixels and normalized image
 * coordinates, accounting for letterboxing when the stimulus keeps its
 * aspect ratio inside the viewport. */

import { RectSelection } from './types.js';

export interface Letterbox {
  offsetX: number;
  offsetY: number;
  drawWidth: number;
  drawHeight: number;
}

export function computeLetterbox(
  imageW: number,
  imageH: number,
  viewW: number,
  viewH: number,
): Letterbox {
  const scale = Math.min(viewW / imageW, viewH / imageH);
  const drawWidth = imageW * scale;
  const drawHeight = imageH * scale;
  return {
    offsetX: (viewW - drawWidth) / 2,
    offsetY: (viewH - drawHeight) / 2,
    drawWidth,
    drawHeight,
  };
}

const clamp01 = (v: number) => Math.min(1, Math.max(0, v));

/** Pixel drag (any corner order) to a normalized selection. */
export function pixelsToRect(
  box: Letterbox,
  px0: number,
  py0: number,
  px1: number,
  py1: number,
): RectSelection {
  const nx = (p: number) => clamp01((p - box.offsetX) / box.drawWidth);
  const ny = (p: number) => clamp01((p - box.offsetY) / box.drawHeight);
  const x0 = Math.min(nx(px0), nx(px1));
  const x1 = Math.max(nx(px0), nx(px1));
  const y0 = Math.min(ny(py0), ny(py1));
  const y1 = Math.max(ny(py0), ny(py1));
  return { x0, y0, x1, y1 };
}

export function rectToPixels(box: Letterbox, rect: RectSelection) {
  return {
    left: box.offsetX + rect.x0 * box.drawWidth,
    top: box.offsetY + rect.y0 * box.drawHeight,
    width: (rect.x1 - rect.x0) * box.drawWidth,
    height: (rect.y1 - rect.y0) * box.drawHeight,
  };
}
