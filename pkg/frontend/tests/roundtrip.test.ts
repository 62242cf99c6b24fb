/** End-to-end protocol conformance: a scripted desk-scale session must
 * flow through the analysis CLI with no validation errors. */

import { spawnSync } from 'node:child_process';
import { mkdtempSync, readFileSync, readdirSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { describe, expect, it } from 'vitest';

import { ManualClock } from '../src/clock.js';
import { ExperimentRunner } from '../src/runner.js';
import { ScheduleDoc, serializeSession, validateSession } from '../src/types.js';

const PYTHON = process.env.MEMSCHEMA_PYTHON ?? 'python3';

function haveBackend(): boolean {
  const probe = spawnSync(PYTHON, ['-c', 'import memschema'], { encoding: 'utf-8' });
  return probe.status === 0;
}

const SCHEDULE: ScheduleDoc = {
  seed: 3,
  study: ['im-a', 'im-b', 'im-c', 'im-d'],
  test: [
    { image_id: 'im-a', role: 'repeat' },
    { image_id: 'im-e', role: 'filler' },
    { image_id: 'im-b', role: 'repeat' },
    { image_id: 'im-f', role: 'filler' },
    { image_id: 'im-c', role: 'repeat' },
    { image_id: 'im-g', role: 'filler' },
    { image_id: 'im-d', role: 'repeat' },
    { image_id: 'im-h', role: 'filler' },
  ],
};

async function scriptedSession(participant: number): Promise<string> {
  const clock = new ManualClock();
  const runner = new ExperimentRunner(SCHEDULE, clock);
  const study = await runner.runStudy();
  for (const record of study) {
    expect(Math.abs(record.duration_ms - 3000)).toBeLessThanOrEqual(100);
  }
  await runner.beginTest();
  const ratings = [80, 10, 45, 35, 0, 100, 25, 55].map(
    (base, k) => Math.min(100, Math.max(0, base + ((participant + k) % 3) - 1)),
  );
  for (const rating of ratings) {
    clock.advance(500);
    runner.setRating(rating);
    if (rating >= 30) {
      const shift = 0.05 * (participant % 4);
      runner.addRect({ x0: 0.1 + shift, y0: 0.2, x1: 0.5 + shift, y1: 0.7 });
    }
    expect(await runner.advance()).toBe(true);
  }
  expect(runner.phase).toBe('done');
  const doc = runner.exportSession(`rt-${participant}`, `part-${participant}`);
  expect(validateSession(doc)).toEqual([]);
  return serializeSession(doc);
}

describe.skipIf(!haveBackend())('round trip through the analysis CLI', () => {
  it('build-maps and stats accept the exported log', async () => {
    const root = mkdtempSync(join(tmpdir(), 'runner-rt-'));
    const sessions = join(root, 'sessions');
    const maps = join(root, 'maps');
    const stats = join(root, 'stats');
    spawnSync('mkdir', ['-p', sessions]);
    for (let participant = 0; participant < 4; participant++) {
      writeFileSync(
        join(sessions, `rt-${participant}.jsonl`),
        await scriptedSession(participant),
      );
    }

    const build = spawnSync(
      PYTHON,
      ['-m', 'memschema.cli', 'build-maps', '--logs', sessions, '--kind', 'combined',
       '--out', maps, '--grid', '50x50'],
      { encoding: 'utf-8' },
    );
    expect(build.stderr).toBe('');
    expect(build.status).toBe(0);
    const written = readdirSync(maps).filter((f) => f.endsWith('.vtns'));
    expect(written.length).toBeGreaterThan(0);

    const statsRun = spawnSync(
      PYTHON,
      ['-m', 'memschema.cli', 'stats', '--logs', sessions, '--out', stats],
      { encoding: 'utf-8' },
    );
    expect(statsRun.stderr).toBe('');
    expect(statsRun.status).toBe(0);
    const summary = readFileSync(join(stats, 'summary.txt'), 'utf-8');
    expect(summary).toMatch(/d_prime/);
    expect(summary).toMatch(/HR mean/);
  });
});
