// Pure view logic: category keymap, keyword highlighting, annotation queue.

export interface Category {
  key: string;
  value: string;
  label: string;
}

export const CATEGORIES: readonly Category[] = [
  { key: "1", value: "wrong_last_step", label: "Wrong prediction at last step" },
  { key: "2", value: "error_propagation", label: "Error propagation" },
  { key: "3", value: "invalid_annotation", label: "Invalid or missing annotation" },
];

export function categoryForKey(key: string): Category | null {
  return CATEGORIES.find((c) => c.key === key) ?? null;
}

// Display-side stopwords for question-keyword highlighting.
const STOPWORDS = new Set(
  "a an the is are was were of in on at to who what when where which that and or for from by did does if both".split(" "),
);

const TOKEN = /[0-9A-Za-z]+/g;

export function normalizeToken(token: string): string {
  return token.toLowerCase();
}

export function questionKeywords(question: string): Set<string> {
  const keywords = new Set<string>();
  for (const match of question.matchAll(TOKEN)) {
    const token = normalizeToken(match[0]);
    if (!STOPWORDS.has(token)) keywords.add(token);
  }
  return keywords;
}

export function goldKeywords(golds: string[]): Set<string> {
  const keywords = new Set<string>();
  for (const gold of golds) {
    for (const match of gold.matchAll(TOKEN)) {
      keywords.add(normalizeToken(match[0]));
    }
  }
  return keywords;
}

export interface HighlightSegment {
  text: string;
  kind: "plain" | "question" | "gold";
}

/**
 * Split the context into segments, marking exact normalized-token matches of
 * question keywords and gold-answer tokens. Gold wins when both match.
 */
export function highlightContext(context: string, question: string, golds: string[]): HighlightSegment[] {
  const fromQuestion = questionKeywords(question);
  const fromGold = goldKeywords(golds);
  const segments: HighlightSegment[] = [];
  let cursor = 0;
  for (const match of context.matchAll(TOKEN)) {
    const start = match.index ?? 0;
    const token = match[0];
    const normalized = normalizeToken(token);
    const kind = fromGold.has(normalized) ? "gold" : fromQuestion.has(normalized) ? "question" : "plain";
    if (kind === "plain") continue;
    if (start > cursor) segments.push({ text: context.slice(cursor, start), kind: "plain" });
    segments.push({ text: token, kind });
    cursor = start + token.length;
  }
  if (cursor < context.length) segments.push({ text: context.slice(cursor), kind: "plain" });
  if (segments.length === 0 && context.length > 0) segments.push({ text: context, kind: "plain" });
  return segments;
}

/** Decomposition display: rendered string back to per-step texts. */
export function decompositionSteps(rendered: string | null | undefined): string[] {
  if (!rendered) return [];
  return rendered
    .split(";")
    .map((step) => step.trim().replace(/^return\s+/i, ""))
    .filter((step) => step.length > 0);
}

export function nextUnannotated(ids: string[], annotated: Set<string>, after?: string): string | null {
  if (ids.length === 0) return null;
  const start = after ? ids.indexOf(after) + 1 : 0;
  for (let offset = 0; offset < ids.length; offset++) {
    const id = ids[(start + offset) % ids.length];
    if (!annotated.has(id)) return id;
  }
  return null;
}

export function progress(ids: string[], annotated: Set<string>): { done: number; total: number } {
  let done = 0;
  for (const id of ids) {
    if (annotated.has(id)) done++;
  }
  return { done, total: ids.length };
}

export function stepBy(ids: string[], current: string | null, delta: number): string | null {
  if (ids.length === 0) return null;
  const index = current ? ids.indexOf(current) : -1;
  if (index < 0) return ids[0];
  return ids[(index + delta + ids.length) % ids.length];
}
