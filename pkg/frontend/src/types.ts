// JSON payload shapes of the QA service's HTTP API. The client renders
// these verbatim; no metric or verdict is ever recomputed browser-side.

export interface PipelineOption {
  id: string;
  strategy: string;
  model_id: string;
  top_k: number;
  default: boolean;
}

export interface ConfigsPayload {
  configs: PipelineOption[];
  default_id: string;
}

export interface CitationRef {
  marker: number;
  chunk_id: string;
  doc_id: string;
  section_title: string;
  page_start: number;
  page_end: number;
}

export interface ChatPayload {
  answer: string;
  citations: CitationRef[];
  usage: {
    input_tokens: number;
    output_tokens: number;
    cost_usd: number;
  };
  latency: {
    retrieval_time_s: number;
    generation_time_s: number;
  };
  pipeline: {
    id: string;
    strategy: string;
    model_id: string;
    top_k: number;
  };
}

export interface ChatRequest {
  message: string;
  strategy?: string;
  model?: string;
  top_k?: number;
}

// Grading payloads deliberately carry no pipeline or model identity;
// answers are only ever labeled A and B.
export interface ComparisonTask {
  task_id: string;
  question: string;
  answer_a: string;
  answer_b: string;
}

export interface CompareNextPayload {
  task: ComparisonTask | null;
  progress: { done: number; total: number };
}

export type VoteChoice = "a" | "b" | "tie";

export interface CompareResultsPayload {
  campaign_id: string;
  total_votes: number;
  pipelines: Array<{ pipeline_id: string; wins: number; proportion: number }>;
  ties: { count: number; proportion: number };
}
