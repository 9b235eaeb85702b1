import { ApiClient } from "./api.js";
import { ChatPanel } from "./chat.js";
import { el } from "./dom.js";
import { GradingPanel } from "./grading.js";

declare global {
  interface Window {
    SERVICE_BASE_URL?: string;
  }
}

export function createApp(api: ApiClient): HTMLElement {
  const chat = new ChatPanel(api);
  const grading = new GradingPanel(api);

  const panels: Array<{ name: string; panel: { root: HTMLElement } }> = [
    { name: "Chat", panel: chat },
    { name: "Grading", panel: grading },
  ];

  const tabBar = el("nav", { className: "tabs" });
  const body = el("main", { className: "panel-host" });

  const activate = (index: number) => {
    panels.forEach(({ panel }, i) => {
      panel.root.style.display = i === index ? "" : "none";
    });
    [...tabBar.children].forEach((tab, i) => {
      tab.classList.toggle("active", i === index);
    });
  };

  panels.forEach(({ name, panel }, index) => {
    tabBar.appendChild(
      el(
        "button",
        { className: "tab", type: "button", onClick: () => activate(index) },
        name,
      ),
    );
    body.appendChild(panel.root);
  });
  activate(0);

  return el(
    "div",
    { className: "app" },
    el("header", { className: "masthead" }, el("h1", {}, "Safety Document Assistant")),
    tabBar,
    body,
  );
}

export function main(): void {
  const baseUrl = window.SERVICE_BASE_URL ?? "";
  const api = new ApiClient(baseUrl);
  const mountPoint = document.getElementById("app");
  if (mountPoint) mountPoint.appendChild(createApp(api));
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  main();
}
