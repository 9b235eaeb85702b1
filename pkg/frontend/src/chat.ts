import { ApiClient } from "./api.js";
import { clear, el } from "./dom.js";
import type {
  ChatPayload,
  ChatRequest,
  ConfigsPayload,
  PipelineOption,
} from "./types.js";

function describeError(err: unknown): string {
  if (err instanceof Error) return err.message;
  return String(err);
}

function formatSeconds(value: number): string {
  return `${value.toFixed(2)} s`;
}

function formatCost(value: number): string {
  return `$${value.toFixed(6)}`;
}

// Scroll a citation entry into view and flag it. jsdom lacks
// scrollIntoView, so the call is guarded.
function revealCitation(panel: Element, marker: number): void {
  for (const entry of panel.querySelectorAll(".citation")) {
    entry.classList.toggle(
      "highlight",
      entry.getAttribute("data-marker") === String(marker),
    );
  }
  const target = panel.querySelector(`.citation[data-marker="${marker}"]`);
  if (target && typeof (target as HTMLElement).scrollIntoView === "function") {
    (target as HTMLElement).scrollIntoView({ block: "nearest" });
  }
}

// Answer text with inline [n] references converted to clickable chips.
function renderAnswerText(turn: HTMLElement, text: string): HTMLElement {
  const body = el("div", { className: "answer-text" });
  const parts = text.split(/(\[\d+\])/);
  for (const part of parts) {
    const ref = /^\[(\d+)\]$/.exec(part);
    if (ref) {
      const n = Number(ref[1]);
      body.appendChild(
        el(
          "button",
          {
            className: "inline-ref",
            type: "button",
            "data-marker": String(n),
            onClick: () => revealCitation(turn, n),
          },
          part,
        ),
      );
    } else if (part) {
      body.appendChild(document.createTextNode(part));
    }
  }
  return body;
}

// One assistant turn: answer text, one clickable marker per citation in
// the payload, latency/cost badges echoed verbatim, and the citations
// panel (or a disclaimer when the answer cites nothing).
export function renderChatTurn(payload: ChatPayload): HTMLElement {
  const turn = el("div", { className: "chat-turn" });
  turn.appendChild(renderAnswerText(turn, payload.answer));

  if (payload.citations.length === 0) {
    turn.appendChild(
      el(
        "div",
        { className: "disclaimer-banner", role: "note" },
        "No supporting sources were retrieved for this answer. " +
          "Treat it as unverified and consult the original documents.",
      ),
    );
  } else {
    const strip = el("div", { className: "marker-strip" }, "Sources: ");
    for (const citation of payload.citations) {
      strip.appendChild(
        el(
          "button",
          {
            className: "marker",
            type: "button",
            "data-marker": String(citation.marker),
            onClick: () => revealCitation(turn, citation.marker),
          },
          `[${citation.marker}]`,
        ),
      );
    }
    turn.appendChild(strip);

    const list = el("ul", { className: "citations" });
    for (const citation of payload.citations) {
      list.appendChild(
        el(
          "li",
          { className: "citation", "data-marker": String(citation.marker) },
          el("span", { className: "citation-marker" }, `[${citation.marker}]`),
          " ",
          el("span", { className: "citation-doc" }, citation.doc_id),
          " — ",
          el("span", { className: "citation-section" }, citation.section_title),
          " ",
          el(
            "span",
            { className: "citation-pages" },
            citation.page_start === citation.page_end
              ? `(p. ${citation.page_start})`
              : `(pp. ${citation.page_start}–${citation.page_end})`,
          ),
        ),
      );
    }
    turn.appendChild(list);
  }

  turn.appendChild(
    el(
      "div",
      { className: "badges" },
      el(
        "span",
        { className: "badge badge-latency" },
        `retrieval ${formatSeconds(payload.latency.retrieval_time_s)} · ` +
          `generation ${formatSeconds(payload.latency.generation_time_s)}`,
      ),
      el(
        "span",
        { className: "badge badge-cost" },
        `${formatCost(payload.usage.cost_usd)} ` +
          `(${payload.usage.input_tokens} in / ${payload.usage.output_tokens} out)`,
      ),
      el("span", { className: "badge badge-config" }, payload.pipeline.id),
    ),
  );
  return turn;
}

export class ChatPanel {
  readonly root: HTMLElement;
  readonly ready: Promise<void>;

  private readonly select: HTMLSelectElement;
  private readonly input: HTMLInputElement;
  private readonly sendButton: HTMLButtonElement;
  private readonly history: HTMLElement;
  private configs: ConfigsPayload | null = null;
  private busy = false;

  constructor(private readonly api: ApiClient) {
    this.select = el("select", {
      className: "config-select",
      "aria-label": "Answering configuration",
    }) as HTMLSelectElement;
    this.input = el("input", {
      className: "chat-input",
      type: "text",
      placeholder: "Ask about machine safety…",
      onKeydown: (e: Event) => {
        if ((e as KeyboardEvent).key === "Enter") this.submit();
      },
    }) as HTMLInputElement;
    this.sendButton = el(
      "button",
      { className: "send", type: "button", onClick: () => this.submit() },
      "Send",
    ) as HTMLButtonElement;
    this.history = el("div", { className: "chat-history" });

    this.root = el(
      "section",
      { className: "chat-panel" },
      el(
        "div",
        { className: "config-row" },
        el("label", { className: "config-label" }, "Configuration: "),
        this.select,
      ),
      this.history,
      el(
        "div",
        { className: "composer" },
        this.input,
        this.sendButton,
        el(
          "button",
          {
            className: "modality-toggle voice-toggle",
            type: "button",
            disabled: true,
            "aria-disabled": "true",
            title: "Voice input is not available in this build",
          },
          "Voice",
        ),
        el(
          "button",
          {
            className: "modality-toggle image-toggle",
            type: "button",
            disabled: true,
            "aria-disabled": "true",
            title: "Image input is not available in this build",
          },
          "Image",
        ),
      ),
    );
    this.ready = this.loadConfigs();
  }

  mount(container: Element): void {
    container.appendChild(this.root);
  }

  private async loadConfigs(): Promise<void> {
    try {
      this.configs = await this.api.getConfigs();
      this.populateSelect(this.configs);
    } catch {
      // Read-only default mode: the selector is disabled and /chat is
      // called without overrides, so the service default applies.
      this.configs = null;
      clear(this.select);
      this.select.appendChild(
        el("option", { value: "" }, "deployment default"),
      );
      this.select.disabled = true;
      this.root.insertBefore(
        el(
          "div",
          { className: "config-warning" },
          "Configuration list unavailable — answers use the deployment default.",
        ),
        this.history,
      );
    }
  }

  private populateSelect(configs: ConfigsPayload): void {
    clear(this.select);
    const byStrategy = new Map<string, PipelineOption[]>();
    for (const option of configs.configs) {
      const group = byStrategy.get(option.strategy) ?? [];
      group.push(option);
      byStrategy.set(option.strategy, group);
    }
    for (const [strategy, options] of byStrategy) {
      const group = el("optgroup", { label: strategy });
      for (const option of options) {
        group.appendChild(
          el(
            "option",
            {
              value: option.id,
              selected: option.id === configs.default_id,
            },
            `${option.model_id} · k=${option.top_k}`,
          ),
        );
      }
      this.select.appendChild(group);
    }
    this.select.value = configs.default_id;
  }

  private selectedOption(): PipelineOption | null {
    if (!this.configs) return null;
    const id = this.select.value;
    return this.configs.configs.find((c) => c.id === id) ?? null;
  }

  private requestFor(message: string): ChatRequest {
    const option = this.selectedOption();
    if (!option) return { message };
    return {
      message,
      strategy: option.strategy,
      model: option.model_id,
      top_k: option.top_k,
    };
  }

  private setBusy(busy: boolean): void {
    this.busy = busy;
    this.sendButton.disabled = busy;
    this.input.disabled = busy;
  }

  private submit(): void {
    const message = this.input.value.trim();
    if (!message || this.busy) return;
    this.input.value = "";
    this.history.appendChild(el("div", { className: "turn turn-user" }, message));
    const slot = el("div", { className: "turn turn-assistant pending" }, "Thinking…");
    this.history.appendChild(slot);
    void this.fill(slot, message);
  }

  private async fill(slot: HTMLElement, message: string): Promise<void> {
    this.setBusy(true);
    clear(slot);
    slot.className = "turn turn-assistant pending";
    slot.appendChild(document.createTextNode("Thinking…"));
    try {
      const payload = await this.api.chat(this.requestFor(message));
      clear(slot);
      slot.className = "turn turn-assistant";
      slot.appendChild(renderChatTurn(payload));
    } catch (err) {
      clear(slot);
      slot.className = "turn turn-assistant failed";
      slot.appendChild(
        el(
          "div",
          { className: "error-banner", role: "alert" },
          el("span", { className: "error-message" }, describeError(err)),
          " ",
          el(
            "button",
            {
              className: "retry",
              type: "button",
              onClick: () => {
                if (!this.busy) void this.fill(slot, message);
              },
            },
            "Retry",
          ),
        ),
      );
    } finally {
      this.setBusy(false);
    }
  }
}
