import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";
import { ApiClient } from "../src/api.js";
import { ChatPanel } from "../src/chat.js";
import type { ChatPayload, ConfigsPayload } from "../src/types.js";
import { FakeService, loadFixture } from "./fake_service.js";

const BASE = "http://svc.test";
const configsFixture = loadFixture<ConfigsPayload>("configs.json");
const chatFixture = loadFixture<ChatPayload>("chat.json");

async function makePanel(fake: FakeService): Promise<ChatPanel> {
  const panel = new ChatPanel(new ApiClient(BASE, fake.fetchFn));
  panel.mount(document.body);
  await panel.ready;
  return panel;
}

function send(panel: ChatPanel, text: string): void {
  const input = panel.root.querySelector<HTMLInputElement>(".chat-input")!;
  input.value = text;
  panel.root.querySelector<HTMLButtonElement>(".send")!.click();
}

function chatRequests(fake: FakeService) {
  return fake.requests.filter((r) => r.method === "POST" && r.path === "/chat");
}

beforeEach(() => {
  document.body.innerHTML = "";
});

describe("config selector", () => {
  it("exposes all 24 options with the deployment default pre-selected", async () => {
    const panel = await makePanel(new FakeService());
    const select = panel.root.querySelector<HTMLSelectElement>(".config-select")!;
    expect(select.options).toHaveLength(24);
    expect(select.value).toBe(configsFixture.default_id);
    expect(select.selectedOptions[0].value).toBe(configsFixture.default_id);
    expect(select.disabled).toBe(false);
    const groups = select.querySelectorAll("optgroup");
    expect(groups).toHaveLength(6);
    const labels = [...groups].map((g) => g.getAttribute("label"));
    expect(new Set(labels).size).toBe(6);
  });

  it("attaches the changed selection to the next chat request", async () => {
    const fake = new FakeService();
    const panel = await makePanel(fake);
    const select = panel.root.querySelector<HTMLSelectElement>(".config-select")!;
    select.value = "gpt-5-nano-2025-08-07_bm25_3";
    send(panel, "what is lockout?");
    await vi.waitFor(() =>
      expect(panel.root.querySelector(".badge-config")).toBeTruthy(),
    );
    expect(chatRequests(fake)).toHaveLength(1);
    expect(chatRequests(fake)[0].body).toEqual({
      message: "what is lockout?",
      strategy: "bm25",
      model: "gpt-5-nano-2025-08-07",
      top_k: 3,
    });
    expect(panel.root.querySelector(".badge-config")!.textContent).toBe(
      "gpt-5-nano-2025-08-07_bm25_3",
    );
  });

  it("falls back to read-only default mode when configs cannot be fetched", async () => {
    const fake = new FakeService();
    fake.failConfigs = true;
    const panel = await makePanel(fake);
    const select = panel.root.querySelector<HTMLSelectElement>(".config-select")!;
    expect(select.disabled).toBe(true);
    expect(select.options).toHaveLength(1);
    expect(panel.root.querySelector(".config-warning")).toBeTruthy();
    send(panel, "what is lockout?");
    await vi.waitFor(() =>
      expect(panel.root.querySelector(".marker")).toBeTruthy(),
    );
    expect(chatRequests(fake)[0].body).toEqual({ message: "what is lockout?" });
  });
});

describe("chat turns", () => {
  it("renders one clickable marker per citation in the payload", async () => {
    const fake = new FakeService();
    const panel = await makePanel(fake);
    send(panel, "what is a pinch point?");
    await vi.waitFor(() =>
      expect(panel.root.querySelector(".chat-turn")).toBeTruthy(),
    );
    const markers = panel.root.querySelectorAll(".marker");
    expect(markers).toHaveLength(chatFixture.citations.length);
    expect([...markers].map((m) => m.textContent)).toEqual(
      chatFixture.citations.map((c) => `[${c.marker}]`),
    );
    const entries = panel.root.querySelectorAll(".citation");
    expect(entries).toHaveLength(chatFixture.citations.length);
    expect(
      panel.root.querySelector(".citation .citation-doc")!.textContent,
    ).toBe(chatFixture.citations[0].doc_id);
    expect(
      panel.root.querySelector(".answer-text")!.textContent,
    ).toContain("pinch hazard");
    expect(panel.root.querySelector(".badge-latency")!.textContent).toContain(
      "retrieval",
    );
    expect(panel.root.querySelector(".badge-cost")!.textContent).toContain("$");
  });

  it("scrolls and highlights the matching citation when a marker is clicked", async () => {
    const scrolled: Element[] = [];
    (Element.prototype as { scrollIntoView?: () => void }).scrollIntoView =
      function (this: Element) {
        scrolled.push(this);
      };
    try {
      const panel = await makePanel(new FakeService());
      send(panel, "what is a pinch point?");
      await vi.waitFor(() =>
        expect(panel.root.querySelector(".marker")).toBeTruthy(),
      );
      panel.root
        .querySelector<HTMLButtonElement>('.marker[data-marker="3"]')!
        .click();
      const third = panel.root.querySelector('.citation[data-marker="3"]')!;
      expect(third.classList.contains("highlight")).toBe(true);
      expect(scrolled).toContain(third);
      panel.root
        .querySelector<HTMLButtonElement>('.inline-ref[data-marker="1"]')!
        .click();
      expect(third.classList.contains("highlight")).toBe(false);
      expect(
        panel.root
          .querySelector('.citation[data-marker="1"]')!
          .classList.contains("highlight"),
      ).toBe(true);
    } finally {
      delete (Element.prototype as { scrollIntoView?: () => void })
        .scrollIntoView;
    }
  });

  it("shows a disclaimer banner when the answer cites nothing", async () => {
    const fake = new FakeService();
    fake.zeroCitations = true;
    const panel = await makePanel(fake);
    send(panel, "what is the airspeed of a swallow?");
    await vi.waitFor(() =>
      expect(panel.root.querySelector(".chat-turn")).toBeTruthy(),
    );
    expect(panel.root.querySelector(".disclaimer-banner")).toBeTruthy();
    expect(panel.root.querySelectorAll(".marker")).toHaveLength(0);
    expect(panel.root.querySelector(".citations")).toBeNull();
  });

  it("renders failures as an inline banner whose retry resends the message", async () => {
    const fake = new FakeService();
    fake.failNextChat = { status: 503, detail: "generation backend unreachable" };
    const panel = await makePanel(fake);
    send(panel, "what is lockout?");
    await vi.waitFor(() =>
      expect(panel.root.querySelector(".error-banner")).toBeTruthy(),
    );
    expect(panel.root.querySelector(".error-message")!.textContent).toBe(
      "generation backend unreachable",
    );
    expect(panel.root.querySelectorAll(".marker")).toHaveLength(0);
    panel.root.querySelector<HTMLButtonElement>(".retry")!.click();
    await vi.waitFor(() =>
      expect(panel.root.querySelector(".marker")).toBeTruthy(),
    );
    expect(chatRequests(fake)).toHaveLength(2);
    expect(chatRequests(fake)[1].body).toMatchObject({
      message: "what is lockout?",
    });
    expect(panel.root.querySelector(".error-banner")).toBeNull();
  });

  it("allows only one in-flight request at a time", async () => {
    const fake = new FakeService();
    const panel = await makePanel(fake);
    const release = fake.gateNextChat();
    send(panel, "first question");
    expect(chatRequests(fake)).toHaveLength(1);
    const sendButton = panel.root.querySelector<HTMLButtonElement>(".send")!;
    const input = panel.root.querySelector<HTMLInputElement>(".chat-input")!;
    expect(sendButton.disabled).toBe(true);
    expect(input.disabled).toBe(true);
    send(panel, "second question while busy");
    expect(chatRequests(fake)).toHaveLength(1);
    release();
    await vi.waitFor(() =>
      expect(panel.root.querySelector(".marker")).toBeTruthy(),
    );
    expect(sendButton.disabled).toBe(false);
    send(panel, "third question");
    await vi.waitFor(() => expect(chatRequests(fake)).toHaveLength(2));
    const userTurns = [...panel.root.querySelectorAll(".turn-user")].map(
      (t) => t.textContent,
    );
    expect(userTurns).toEqual(["first question", "third question"]);
  });

  it("keeps the voice and image controls visible but disabled", async () => {
    const panel = await makePanel(new FakeService());
    for (const cls of [".voice-toggle", ".image-toggle"]) {
      const toggle = panel.root.querySelector<HTMLButtonElement>(cls)!;
      expect(toggle.disabled).toBe(true);
      expect(toggle.title).toContain("not available");
    }
  });
});

afterEach(() => {
  document.body.innerHTML = "";
});
