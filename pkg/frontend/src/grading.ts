import { ApiClient, ApiError } from "./api.js";
import { clear, el } from "./dom.js";
import type { ComparisonTask, VoteChoice } from "./types.js";

function describeError(err: unknown): string {
  if (err instanceof Error) return err.message;
  return String(err);
}

// Blind A/B grading workspace. Everything rendered here comes from the
// comparison endpoints, which carry no configuration identity — answers
// are only ever labeled A and B, and the completion summary names the
// contenders by position only.
export class GradingPanel {
  readonly root: HTMLElement;

  private readonly stage: HTMLElement;
  private graderId = "";
  private votesCast = 0;
  private busy = false;

  constructor(private readonly api: ApiClient) {
    this.stage = el("div", { className: "grading-stage" });
    this.root = el("section", { className: "grading-panel" }, this.stage);
    this.renderStart();
  }

  mount(container: Element): void {
    container.appendChild(this.root);
  }

  private renderStart(): void {
    clear(this.stage);
    const input = el("input", {
      className: "grader-id",
      type: "text",
      value: "grader-1",
      "aria-label": "Grader ID",
    }) as HTMLInputElement;
    input.value = "grader-1";
    this.stage.appendChild(
      el(
        "div",
        { className: "start-form" },
        el("p", {}, "Enter your grader ID to begin the comparison session."),
        el("label", {}, "Grader ID: ", input),
        " ",
        el(
          "button",
          {
            className: "start",
            type: "button",
            onClick: () => {
              const id = input.value.trim();
              if (id) void this.start(id);
            },
          },
          "Start grading",
        ),
      ),
    );
  }

  async start(graderId: string): Promise<void> {
    this.graderId = graderId;
    this.votesCast = 0;
    await this.advance();
  }

  private async advance(): Promise<void> {
    try {
      const payload = await this.api.compareNext(this.graderId);
      if (payload.task === null) {
        await this.renderCompletion();
      } else {
        this.renderTask(payload.task, payload.progress);
      }
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) {
        clear(this.stage);
        this.stage.appendChild(
          el(
            "p",
            { className: "no-campaign" },
            "No comparison session is currently active.",
          ),
        );
        return;
      }
      this.renderError(describeError(err), () => void this.advance());
    }
  }

  private renderTask(
    task: ComparisonTask,
    progress: { done: number; total: number },
  ): void {
    clear(this.stage);
    const voteButton = (label: string, choice: VoteChoice, cls: string) =>
      el(
        "button",
        {
          className: `vote ${cls}`,
          type: "button",
          onClick: () => void this.vote(task.task_id, choice),
        },
        label,
      );
    this.stage.appendChild(
      el(
        "div",
        { className: "task-view", "data-task-id": task.task_id },
        el(
          "p",
          { className: "progress" },
          `Completed ${progress.done} of ${progress.total}`,
        ),
        el("h3", { className: "question" }, task.question),
        el(
          "div",
          { className: "answers" },
          el(
            "div",
            { className: "answer answer-a" },
            el("h4", {}, "Answer A"),
            el("p", {}, task.answer_a),
          ),
          el(
            "div",
            { className: "answer answer-b" },
            el("h4", {}, "Answer B"),
            el("p", {}, task.answer_b),
          ),
        ),
        el(
          "div",
          { className: "vote-row" },
          voteButton("Answer A is better", "a", "vote-a"),
          voteButton("Answer B is better", "b", "vote-b"),
          voteButton("Tie", "tie", "vote-tie"),
        ),
      ),
    );
  }

  private async vote(taskId: string, choice: VoteChoice): Promise<void> {
    if (this.busy) return;
    this.busy = true;
    try {
      await this.api.compareVote(taskId, this.graderId, choice);
      this.votesCast += 1;
      await this.advance();
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // Someone (or a double submission) already recorded this vote;
        // skip forward to the next open task.
        await this.advance();
      } else {
        this.renderError(describeError(err), () => void this.advance());
      }
    } finally {
      this.busy = false;
    }
  }

  private renderError(message: string, retry: () => void): void {
    clear(this.stage);
    this.stage.appendChild(
      el(
        "div",
        { className: "error-banner", role: "alert" },
        el("span", { className: "error-message" }, message),
        " ",
        el("button", { className: "retry", type: "button", onClick: retry }, "Retry"),
      ),
    );
  }

  private async renderCompletion(): Promise<void> {
    clear(this.stage);
    const completion = el(
      "div",
      { className: "completion" },
      el("h3", {}, "Thank you for grading!"),
      el(
        "p",
        { className: "votes-cast", "data-votes": String(this.votesCast) },
        `You cast ${this.votesCast} vote${this.votesCast === 1 ? "" : "s"} this session.`,
      ),
    );
    this.stage.appendChild(completion);
    try {
      // The aggregate is rendered blind: contenders are named by position
      // only, and the payload is discarded after rendering.
      const results = await this.api.compareResults();
      const summary = el(
        "div",
        { className: "summary" },
        el("h4", {}, "Session results so far"),
        el(
          "p",
          { className: "summary-total", "data-total": String(results.total_votes) },
          `Total votes recorded: ${results.total_votes}`,
        ),
      );
      const list = el("ul", { className: "summary-rows" });
      results.pipelines.forEach((row, index) => {
        list.appendChild(
          el(
            "li",
            {
              className: "summary-row",
              "data-wins": String(row.wins),
              "data-proportion": String(row.proportion),
            },
            `Contender ${index + 1}: ${row.wins} wins ` +
              `(${(row.proportion * 100).toFixed(1)}%)`,
          ),
        );
      });
      list.appendChild(
        el(
          "li",
          {
            className: "summary-ties",
            "data-count": String(results.ties.count),
            "data-proportion": String(results.ties.proportion),
          },
          `Ties: ${results.ties.count} (${(results.ties.proportion * 100).toFixed(1)}%)`,
        ),
      );
      summary.appendChild(list);
      completion.appendChild(summary);
    } catch {
      completion.appendChild(
        el(
          "p",
          { className: "summary-unavailable" },
          "Aggregate results are not available right now.",
        ),
      );
    }
  }
}
