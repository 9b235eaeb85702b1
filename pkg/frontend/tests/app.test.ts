import { beforeEach, describe, expect, it, vi } from "vitest";
import { ApiClient } from "../src/api.js";
import { createApp } from "../src/app.js";
import { assertBlind } from "./blind.js";
import { FakeService, makeNeutralCampaign } from "./fake_service.js";

const BASE = "http://svc.test";

beforeEach(() => {
  document.body.innerHTML = "";
});

describe("app shell", () => {
  it("switches between the chat and grading tabs", async () => {
    const fake = new FakeService();
    fake.campaign = makeNeutralCampaign(2);
    const app = createApp(new ApiClient(BASE, fake.fetchFn));
    document.body.appendChild(app);

    const tabs = app.querySelectorAll<HTMLButtonElement>(".tab");
    expect([...tabs].map((t) => t.textContent)).toEqual(["Chat", "Grading"]);
    const chatRoot = app.querySelector<HTMLElement>(".chat-panel")!;
    const gradingRoot = app.querySelector<HTMLElement>(".grading-panel")!;
    expect(chatRoot.style.display).toBe("");
    expect(gradingRoot.style.display).toBe("none");
    expect(tabs[0].classList.contains("active")).toBe(true);

    tabs[1].click();
    expect(gradingRoot.style.display).toBe("");
    expect(chatRoot.style.display).toBe("none");
    expect(tabs[1].classList.contains("active")).toBe(true);
  });

  it("keeps configuration identity in the chat subtree only", async () => {
    const fake = new FakeService();
    fake.campaign = makeNeutralCampaign(2);
    const app = createApp(new ApiClient(BASE, fake.fetchFn));
    document.body.appendChild(app);

    const chatRoot = app.querySelector<HTMLElement>(".chat-panel")!;
    const gradingRoot = app.querySelector<HTMLElement>(".grading-panel")!;
    await vi.waitFor(() =>
      expect(chatRoot.querySelector(".config-select option")).toBeTruthy(),
    );
    // The chat surface legitimately shows configuration ids…
    expect(chatRoot.outerHTML).toContain("gpt-5");
    // …while the grading surface never carries any identity, even after
    // the grader works through the queue.
    assertBlind(gradingRoot);
    gradingRoot.querySelector<HTMLButtonElement>(".start")!.click();
    await vi.waitFor(() =>
      expect(gradingRoot.querySelector(".task-view")).toBeTruthy(),
    );
    assertBlind(gradingRoot);
  });
});
