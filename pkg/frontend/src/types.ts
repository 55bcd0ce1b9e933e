// Shapes mirror the triage API payloads exactly; the UI never invents fields.

export interface StepView {
  step_index: number;
  input_rendered: string;
  answer: string;
  score: number | null;
}

export interface AnnotationView {
  question_id: string;
  category: string;
  note: string | null;
  annotator: string;
  timestamp: string;
}

export interface TraceView {
  question_id: string;
  strategy: string;
  seed: number;
  failed: boolean;
  steps: StepView[];
  final_answer: string;
  gold_answers: string[];
  em: number;
  f1: number;
  annotated?: boolean;
  question_text?: string | null;
  decomposition?: string | null;
  context?: string | null;
  annotation?: AnnotationView | null;
}

export interface InstancePage {
  instances: TraceView[];
  page: number;
  size: number;
  total: number;
  short_sample: boolean;
}

export interface CategoryCount {
  count: number;
  percent: number;
}

export interface SummaryView {
  no_annotations: boolean;
  total: number;
  categories: Record<string, CategoryCount>;
  annotated_question_ids?: string[];
}
