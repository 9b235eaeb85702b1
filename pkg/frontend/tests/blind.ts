import { expect } from "vitest";

// Substrings that would deanonymize a grading surface: model names,
// strategy names, factorial vocabulary. The scan runs over serialized
// HTML, so it covers text, attributes, and class names alike.
export const BANNED_TOKENS = [
  "gpt-5",
  "2025-08-07",
  "mini",
  "nano",
  "bm25",
  "graph",
  "mmr",
  "vanilla",
  "remote",
  "keyword",
  "semantic",
  "pipeline",
  "model",
  "strategy",
  "top_k",
];

export function assertBlind(root: Element): void {
  const html = (root as HTMLElement).outerHTML.toLowerCase();
  for (const token of BANNED_TOKENS) {
    expect(html.includes(token), `grading DOM leaked "${token}"`).toBe(false);
  }
}
