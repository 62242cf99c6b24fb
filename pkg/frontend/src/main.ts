/** Browser wiring: fetches the manifest and schedule, runs both phases
 * and posts the session.  All protocol logic lives in runner.ts; this
 * file only binds DOM events. */

import { fetchManifest, fetchSchedule, SessionUploader } from './api.js';
import { computeLetterbox, pixelsToRect, rectToPixels } from './canvas.js';
import { RealClock } from './clock.js';
import { ExperimentRunner } from './runner.js';
import { validateSession } from './types.js';

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

async function preload(url: string): Promise<HTMLImageElement | null> {
  return new Promise((resolve) => {
    const img = new Image();
    img.onload = () => resolve(img);
    img.onerror = () => resolve(null);
    img.src = url;
  });
}

export async function boot(baseUrl: string): Promise<void> {
  const clock = new RealClock();
  const uploader = new SessionUploader(baseUrl, fetch.bind(window), window.localStorage);
  await uploader.flush(); // resend anything stranded by an earlier crash

  const manifest = await fetchManifest(baseUrl, fetch.bind(window));
  const seed = Number(new URLSearchParams(location.search).get('seed') ?? '0');
  const schedule = await fetchSchedule(baseUrl, seed, fetch.bind(window));
  const imageUrl = new Map(manifest.images.map((im) => [im.id, `${baseUrl}/${im.path ?? ''}`]));
  const images = new Map<string, HTMLImageElement>();
  for (const id of schedule.study) {
    const img = await preload(imageUrl.get(id) ?? '');
    if (img) images.set(id, img);
  }
  for (const t of schedule.test) {
    if (!images.has(t.image_id)) {
      const img = await preload(imageUrl.get(t.image_id) ?? '');
      if (img) images.set(t.image_id, img);
    }
  }

  const stage = $('stage') as HTMLCanvasElement;
  const ctx = stage.getContext('2d')!;
  const slider = $('rating') as HTMLInputElement;
  const nextBtn = $('next') as HTMLButtonElement;
  const clearBtn = $('clear') as HTMLButtonElement;
  const status = $('status');

  function paint(imageId: string, withRects: boolean): boolean {
    const img = images.get(imageId);
    ctx.clearRect(0, 0, stage.width, stage.height);
    if (!img) return false;
    const box = computeLetterbox(img.width, img.height, stage.width, stage.height);
    ctx.drawImage(img, box.offsetX, box.offsetY, box.drawWidth, box.drawHeight);
    if (withRects) {
      ctx.strokeStyle = '#00cc44';
      ctx.lineWidth = 2;
      for (const r of runner.currentRects()) {
        const p = rectToPixels(box, r);
        ctx.strokeRect(p.left, p.top, p.width, p.height);
      }
    }
    return true;
  }

  const runner = new ExperimentRunner(schedule, clock, {
    show: (imageId, phase) => paint(imageId, phase === 'test'),
  });

  let dragStart: { x: number; y: number } | null = null;
  stage.addEventListener('mousedown', (e) => {
    if (!runner.canDraw()) return;
    dragStart = { x: e.offsetX, y: e.offsetY };
  });
  stage.addEventListener('mouseup', (e) => {
    const current = runner.currentTest();
    if (!dragStart || !current) return;
    const img = images.get(current.image_id);
    if (img) {
      const box = computeLetterbox(img.width, img.height, stage.width, stage.height);
      const rect = pixelsToRect(box, dragStart.x, dragStart.y, e.offsetX, e.offsetY);
      runner.addRect(rect);
    }
    dragStart = null;
    paint(current.image_id, true);
    refresh();
  });

  slider.addEventListener('input', () => {
    runner.setRating(Number(slider.value));
    refresh();
  });
  clearBtn.addEventListener('click', () => {
    while (runner.currentRects().length) runner.removeRect(0);
    refresh();
  });
  nextBtn.addEventListener('click', async () => {
    await runner.advance();
    slider.value = '0';
    if (runner.phase === 'done') await finish();
    refresh();
  });

  function refresh(): void {
    nextBtn.disabled = !runner.canAdvance();
    const current = runner.currentTest();
    status.textContent = current
      ? `test ${runner.testRecords.length + 1}/${schedule.test.length}`
      : runner.phase;
  }

  async function finish(): Promise<void> {
    const doc = runner.exportSession(`sess-${Date.now()}`, `anon-${seed}`);
    const problems = validateSession(doc);
    if (problems.length) {
      status.textContent = `export blocked: ${problems[0]}`;
      return;
    }
    const result = await uploader.submit(doc);
    status.textContent =
      result.status === 'accepted'
        ? 'session uploaded, thank you'
        : result.status === 'queued'
          ? 'offline: session stored locally, will retry'
          : `rejected: ${result.detail}`;
  }

  status.textContent = 'press start';
  $('start').addEventListener('click', async () => {
    await runner.runStudy();
    await runner.beginTest();
    refresh();
  });
}

declare global {
  interface Window {
    bootRunner: typeof boot;
  }
}
if (typeof window !== 'undefined') {
  window.bootRunner = boot;
}
