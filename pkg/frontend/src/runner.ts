/** Experiment state machine, UI-agnostic.
 *
 * Study phase: each image is preceded by a fixation interval and shown
 * for a fixed duration (default 3000 ms), auto-advancing; the measured
 * duration is recorded per trial.  Test phase: self-paced, one trial at
 * a time; the rating slider (integer 0..100) gates rectangle drawing at
 * 30, and advancing requires either a sub-gate rating or 1..3
 * rectangles.
 */

import { Clock } from './clock.js';
import {
  MAX_SELECTIONS,
  RectSelection,
  ScheduleDoc,
  SELECTION_GATE,
  SessionDocument,
  StudyTrialRecord,
  TestTrialRecord,
} from './types.js';

export type Phase = 'idle' | 'study' | 'test' | 'done';

export interface RunnerOptions {
  studyMs?: number;
  fixationMs?: number;
  /** present an image; resolve false to mark the trial as skipped */
  show?: (imageId: string, phase: Phase) => Promise<boolean> | boolean;
}

export interface SkippedStudyTrial {
  image_id: string;
  reason: string;
}

export class ExperimentRunner {
  readonly schedule: ScheduleDoc;
  phase: Phase = 'idle';
  studyRecords: StudyTrialRecord[] = [];
  skipped: SkippedStudyTrial[] = [];
  testRecords: TestTrialRecord[] = [];

  private clock: Clock;
  private studyMs: number;
  private fixationMs: number;
  private show: (imageId: string, phase: Phase) => Promise<boolean> | boolean;

  private testIndex = 0;
  private trialStart = 0;
  private rating: number | null = null;
  private rects: RectSelection[] = [];

  constructor(schedule: ScheduleDoc, clock: Clock, options: RunnerOptions = {}) {
    this.schedule = schedule;
    this.clock = clock;
    this.studyMs = options.studyMs ?? 3000;
    this.fixationMs = options.fixationMs ?? 1000;
    this.show = options.show ?? (() => true);
  }

  async runStudy(): Promise<StudyTrialRecord[]> {
    if (this.phase !== 'idle') throw new Error(`cannot start study in phase ${this.phase}`);
    this.phase = 'study';
    for (const imageId of this.schedule.study) {
      await this.clock.wait(this.fixationMs);
      const shown = await this.show(imageId, 'study');
      if (!shown) {
        this.skipped.push({ image_id: imageId, reason: 'image failed to load' });
        continue;
      }
      const onset = this.clock.now();
      await this.clock.wait(this.studyMs);
      this.studyRecords.push({
        image_id: imageId,
        onset_ms: Math.round(onset),
        duration_ms: Math.round(this.clock.now() - onset),
      });
    }
    return this.studyRecords;
  }

  async beginTest(): Promise<void> {
    if (this.phase !== 'study') throw new Error(`cannot start test in phase ${this.phase}`);
    this.phase = 'test';
    this.testIndex = 0;
    await this.presentCurrent();
  }

  private async presentCurrent(): Promise<void> {
    this.rating = null;
    this.rects = [];
    if (this.testIndex >= this.schedule.test.length) {
      this.phase = 'done';
      return;
    }
    await this.show(this.schedule.test[this.testIndex].image_id, 'test');
    this.trialStart = this.clock.now();
  }

  currentTest(): { image_id: string; role: string } | null {
    if (this.phase !== 'test' || this.testIndex >= this.schedule.test.length) return null;
    return this.schedule.test[this.testIndex];
  }

  currentRating(): number | null {
    return this.rating;
  }

  currentRects(): readonly RectSelection[] {
    return this.rects;
  }

  setRating(value: number): void {
    if (this.phase !== 'test') throw new Error('no active test trial');
    if (!Number.isInteger(value) || value < 0 || value > 100) {
      throw new Error(`rating must be an integer in 0..100, got ${value}`);
    }
    this.rating = value;
    if (value < SELECTION_GATE) this.rects = [];
  }

  /** Drawing unlocks only at or above the gate. */
  canDraw(): boolean {
    return this.phase === 'test' && this.rating !== null && this.rating >= SELECTION_GATE;
  }

  /** Returns false (rejecting the rectangle) when drawing is locked,
   * the cap is reached, or the rectangle is malformed. */
  addRect(rect: RectSelection): boolean {
    if (!this.canDraw()) return false;
    if (this.rects.length >= MAX_SELECTIONS) return false;
    const inUnit = (v: number) => v >= 0 && v <= 1;
    if (!(inUnit(rect.x0) && inUnit(rect.y0) && inUnit(rect.x1) && inUnit(rect.y1))) return false;
    if (!(rect.x0 < rect.x1 && rect.y0 < rect.y1)) return false;
    this.rects.push(rect);
    return true;
  }

  removeRect(index: number): void {
    this.rects.splice(index, 1);
  }

  /** Participant must have touched the slider; above the gate they must
   * also have drawn 1..3 rectangles. */
  canAdvance(): boolean {
    if (this.phase !== 'test' || this.rating === null) return false;
    if (this.rating < SELECTION_GATE) return true;
    return this.rects.length >= 1 && this.rects.length <= MAX_SELECTIONS;
  }

  async advance(): Promise<boolean> {
    if (!this.canAdvance()) return false;
    const trial = this.schedule.test[this.testIndex];
    this.testRecords.push({
      image_id: trial.image_id,
      role: trial.role,
      confidence: this.rating as number,
      selections: [...this.rects],
      response_ms: Math.max(0, Math.round(this.clock.now() - this.trialStart)),
    });
    this.testIndex += 1;
    await this.presentCurrent();
    return true;
  }

  exportSession(sessionId: string, participantId: string): SessionDocument {
    return {
      header: {
        session_id: sessionId,
        participant_id: participantId,
        schedule_seed: this.schedule.seed,
        incomplete: this.phase !== 'done',
      },
      study: [...this.studyRecords],
      test: [...this.testRecords],
    };
  }
}
