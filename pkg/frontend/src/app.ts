// DOM wiring for the triage single page. All durable state lives behind the API.

import { ApiError, TriageApi } from "./api.js";
import {
  CATEGORIES,
  categoryForKey,
  decompositionSteps,
  highlightContext,
  nextUnannotated,
  progress,
  stepBy,
} from "./triage.js";
import type { SummaryView, TraceView } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

class TriageApp {
  private api = new TriageApi();
  private ids: string[] = [];
  private annotated = new Set<string>();
  private current: TraceView | null = null;
  private selection: string | null = null;
  private lastAction: () => Promise<void> = () => this.start();

  async start(): Promise<void> {
    this.lastAction = () => this.start();
    const page = await this.api.listInstances({ errorsOnly: true, size: 1000 });
    this.ids = page.instances.map((t) => t.question_id);
    await this.refreshSummary();
    const first = nextUnannotated(this.ids, this.annotated) ?? this.ids[0] ?? null;
    if (first) {
      await this.open(first);
    } else {
      el("question").textContent = "No error instances to annotate.";
    }
    this.renderProgress();
    el("main").classList.remove("hidden");
  }

  async open(questionId: string): Promise<void> {
    this.lastAction = () => this.open(questionId);
    const trace = await this.api.getInstance(questionId);
    this.current = trace;
    this.selection = trace.annotation?.category ?? null;
    this.render(trace);
    this.renderProgress();
  }

  private render(trace: TraceView): void {
    el("question").textContent = trace.question_text ?? trace.question_id;
    el("meta").textContent =
      `${trace.question_id} · strategy ${trace.strategy} · seed ${trace.seed} · em ${trace.em} · f1 ${trace.f1.toFixed(3)}`;

    const decompositionList = el("decomposition");
    decompositionList.replaceChildren();
    for (const step of decompositionSteps(trace.decomposition)) {
      const item = document.createElement("li");
      item.textContent = step;
      decompositionList.appendChild(item);
    }

    const stepsBody = el("steps").querySelector("tbody")!;
    stepsBody.replaceChildren();
    for (const step of trace.steps) {
      const row = document.createElement("tr");
      const index = document.createElement("td");
      index.textContent = `#${step.step_index}`;
      const input = document.createElement("td");
      input.className = "step-input";
      input.textContent = step.input_rendered;
      const answer = document.createElement("td");
      answer.className = "step-answer";
      answer.textContent = step.answer;
      row.append(index, input, answer);
      stepsBody.appendChild(row);
    }

    el("final").replaceChildren();
    const predicted = document.createElement("div");
    predicted.innerHTML = `<strong>predicted:</strong> `;
    predicted.append(document.createTextNode(trace.final_answer));
    const gold = document.createElement("div");
    gold.innerHTML = `<strong>gold:</strong> `;
    gold.append(document.createTextNode(trace.gold_answers.join(" | ")));
    el("final").append(predicted, gold);

    const context = el("context");
    context.replaceChildren();
    const question = trace.question_text ?? "";
    for (const segment of highlightContext(trace.context ?? "", question, trace.gold_answers)) {
      if (segment.kind === "plain") {
        context.append(document.createTextNode(segment.text));
      } else {
        const mark = document.createElement("mark");
        mark.className = segment.kind;
        mark.textContent = segment.text;
        context.appendChild(mark);
      }
    }
    if (!trace.context) {
      context.textContent = "(no context available — serve with --instances to show it)";
    }

    this.renderCategories();
    (el("note") as HTMLTextAreaElement).value = trace.annotation?.note ?? "";
    el("status").textContent = trace.annotation
      ? `already annotated as ${trace.annotation.category} by ${trace.annotation.annotator}`
      : "";
  }

  private renderCategories(): void {
    const container = el("categories");
    container.replaceChildren();
    for (const category of CATEGORIES) {
      const button = document.createElement("button");
      button.className = "category" + (this.selection === category.value ? " selected" : "");
      button.textContent = `${category.key} · ${category.label}`;
      button.addEventListener("click", () => this.select(category.value));
      container.appendChild(button);
    }
  }

  private renderProgress(): void {
    const { done, total } = progress(this.ids, this.annotated);
    el("progress").textContent = `${done} / ${total} annotated`;
  }

  select(category: string): void {
    this.selection = category;
    this.renderCategories();
  }

  async save(): Promise<void> {
    if (!this.current || !this.selection) {
      el("status").textContent = "pick a category first (keys 1/2/3)";
      return;
    }
    const questionId = this.current.question_id;
    const body = {
      question_id: questionId,
      category: this.selection,
      note: (el("note") as HTMLTextAreaElement).value || null,
      annotator: (el("annotator") as HTMLInputElement).value || "anonymous",
    };
    this.lastAction = () => this.save();
    await this.api.submitAnnotation(body);
    this.annotated.add(questionId);
    await this.refreshSummary();
    this.renderProgress();
    const next = nextUnannotated(this.ids, this.annotated, questionId);
    if (next) {
      await this.open(next);
    } else {
      el("status").textContent = "all error instances annotated";
    }
  }

  async navigate(delta: number): Promise<void> {
    const next = stepBy(this.ids, this.current?.question_id ?? null, delta);
    if (next) await this.open(next);
  }

  private async refreshSummary(): Promise<void> {
    const summary: SummaryView = await this.api.getSummary();
    for (const id of summary.annotated_question_ids ?? []) this.annotated.add(id);
    const container = el("summary");
    container.replaceChildren();
    if (summary.no_annotations) {
      container.textContent = "no annotations yet";
      return;
    }
    const table = document.createElement("table");
    for (const category of CATEGORIES) {
      const entry = summary.categories[category.value] ?? { count: 0, percent: 0 };
      const row = document.createElement("tr");
      row.innerHTML = `<td>${category.label}</td><td>${entry.count}</td><td>${entry.percent}%</td>`;
      table.appendChild(row);
    }
    const total = document.createElement("tr");
    total.innerHTML = `<td><strong>total</strong></td><td>${summary.total}</td><td></td>`;
    table.appendChild(total);
    container.appendChild(table);
  }

  wireEvents(): void {
    document.addEventListener("keydown", (event) => {
      const target = event.target as HTMLElement | null;
      if (target && (target.tagName === "TEXTAREA" || target.tagName === "INPUT")) return;
      const category = categoryForKey(event.key);
      if (category) {
        this.select(category.value);
        return;
      }
      if (event.key === "n") void this.run(() => this.navigate(1));
      if (event.key === "p") void this.run(() => this.navigate(-1));
      if (event.key === "Enter") void this.run(() => this.save());
    });
    el("save").addEventListener("click", () => void this.run(() => this.save()));
    el("retry").addEventListener("click", () => {
      el("error-panel").classList.add("hidden");
      void this.run(this.lastAction);
    });
  }

  async run(action: () => Promise<void>): Promise<void> {
    try {
      await action();
      el("error-panel").classList.add("hidden");
    } catch (error) {
      const message = error instanceof ApiError ? error.message : `unexpected error: ${String(error)}`;
      el("error-message").textContent = message;
      el("error-panel").classList.remove("hidden");
    }
  }
}

const app = new TriageApp();
app.wireEvents();
void app.run(() => app.start());
