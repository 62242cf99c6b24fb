/** Wire types shared with the analysis backend, plus client-side
 * validation mirroring the backend's session-log invariants so a bad
 * document is caught before it is ever posted. */

export const SELECTION_GATE = 30;
export const MAX_SELECTIONS = 3;
export const SESSION_FORMAT = 'memschema-session';

export interface RectSelection {
  x0: number;
  y0: number;
  x1: number;
  y1: number;
}

export type TestRole = 'repeat' | 'filler';

export interface StudyTrialRecord {
  image_id: string;
  onset_ms: number;
  duration_ms: number;
}

export interface TestTrialRecord {
  image_id: string;
  role: TestRole;
  confidence: number;
  selections: RectSelection[];
  response_ms: number;
}

export interface SessionHeader {
  session_id: string;
  participant_id: string;
  schedule_seed: number | null;
  incomplete: boolean;
}

export interface SessionDocument {
  header: SessionHeader;
  study: StudyTrialRecord[];
  test: TestTrialRecord[];
}

export interface ScheduledTest {
  image_id: string;
  role: TestRole;
}

export interface ScheduleDoc {
  seed: number;
  study: string[];
  test: ScheduledTest[];
}

export interface ManifestImage {
  id: string;
  category: string;
  width: number;
  height: number;
  path?: string;
}

export interface ManifestDoc {
  format: string;
  images: ManifestImage[];
}

export function serializeSession(doc: SessionDocument): string {
  const lines: string[] = [];
  lines.push(
    JSON.stringify({
      type: 'header',
      format: SESSION_FORMAT,
      version: 1,
      session_id: doc.header.session_id,
      participant_id: doc.header.participant_id,
      schedule_seed: doc.header.schedule_seed,
      incomplete: doc.header.incomplete,
    }),
  );
  for (const t of doc.study) {
    lines.push(
      JSON.stringify({
        type: 'study',
        image_id: t.image_id,
        onset_ms: t.onset_ms,
        duration_ms: t.duration_ms,
      }),
    );
  }
  for (const t of doc.test) {
    lines.push(
      JSON.stringify({
        type: 'test',
        image_id: t.image_id,
        role: t.role,
        confidence: t.confidence,
        selections: t.selections,
        response_ms: t.response_ms,
      }),
    );
  }
  return lines.join('\n') + '\n';
}

/** Returns a list of human-readable violations; empty means valid. */
export function validateSession(doc: SessionDocument): string[] {
  const errors: string[] = [];
  const studyIds = new Set<string>();
  for (const t of doc.study) {
    if (studyIds.has(t.image_id)) errors.push(`study image ${t.image_id} repeated`);
    studyIds.add(t.image_id);
  }
  const testIds = new Set<string>();
  doc.test.forEach((t, i) => {
    if (testIds.has(t.image_id)) errors.push(`test image ${t.image_id} repeated`);
    testIds.add(t.image_id);
    if (!Number.isInteger(t.confidence) || t.confidence < 0 || t.confidence > 100) {
      errors.push(`trial ${i}: confidence out of range (${t.confidence})`);
    }
    if (t.selections.length > MAX_SELECTIONS) {
      errors.push(`trial ${i}: selection count ${t.selections.length} exceeds ${MAX_SELECTIONS}`);
    }
    if (t.confidence < SELECTION_GATE && t.selections.length > 0) {
      errors.push(`trial ${i}: selections below the confidence gate`);
    }
    if (t.confidence >= SELECTION_GATE && t.selections.length === 0) {
      errors.push(`trial ${i}: no selections at or above the confidence gate`);
    }
    for (const s of t.selections) {
      const inUnit = (v: number) => v >= 0 && v <= 1;
      if (!(inUnit(s.x0) && inUnit(s.y0) && inUnit(s.x1) && inUnit(s.y1))) {
        errors.push(`trial ${i}: selection coordinate outside [0,1]`);
      }
      if (!(s.x0 < s.x1 && s.y0 < s.y1)) {
        errors.push(`trial ${i}: selection must satisfy x0<x1 and y0<y1`);
      }
    }
    if (t.role === 'repeat' && doc.study.length > 0 && !studyIds.has(t.image_id)) {
      errors.push(`trial ${i}: repeat image ${t.image_id} never studied`);
    }
  });
  return errors;
}
