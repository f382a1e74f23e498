/** Payload types for the deidkit annotation service (schema_version 1). */

export type Category = "PERSON" | "ADDRESS" | "DOB" | "IDN" | "PHONE";

export type Source = "human" | "machine";

export interface SpanJson {
  start: number;
  end: number;
  category: Category;
  source: Source;
}

export interface DocSummary {
  doc_id: string;
  status: "in_progress" | "confirmed";
  revision: number;
  span_count: number;
  pretag_available: boolean;
}

export interface DocPayload {
  schema_version: number;
  doc_id: string;
  text: string;
  revision: number;
  status: string;
  spans: SpanJson[];
  /** [start, end) character offsets of every token, in document order. */
  tokens: [number, number][];
  categories: Category[];
}

export interface SaveBody {
  revision: number;
  spans: SpanJson[];
  annotator: string;
  status: "in_progress" | "confirmed";
}

export interface PretagResponse {
  schema_version: number;
  doc_id: string;
  revision: number;
  status: string;
  spans: SpanJson[];
}
