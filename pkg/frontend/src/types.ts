/** Wire types mirrored from the fhirlit service API. */

export type Demographics = {
  family_name: string;
  given_names: string[];
  birth_date: string | null;
  administrative_gender: string;
  age_years: number;
  allergies_count: number;
};

export type PatientHandle = {
  patient_id: string;
  demographics: Demographics;
  catalog_size: number;
  kind_counts?: Record<string, number>;
};

export type CatalogRow = {
  kind: string;
  display_name: string;
  date: string | null;
  rendered: string;
  resource_id: string;
};

export type ResourceSummary = {
  rendered: string;
  summary_text: string;
  word_count: number;
  locale: string;
};

export type ResourceInterpretation = {
  rendered: string;
  interpretation_text: string;
  locale: string;
};

export type SessionHandle = {
  session_id: string;
  patient_label: string;
  locale: string;
  created_at: string;
};

export type SessionEventKind =
  | "user_message"
  | "tool_call"
  | "tool_result"
  | "assistant_chunk"
  | "assistant_done"
  | "cleared"
  | "error";

export type SessionEvent = {
  kind: SessionEventKind;
  payload: string;
  timestamp: number;
};

/** Supported UI languages; answers follow the server-side session locale. */
export const LOCALES = ["en", "es", "zh", "de", "fr"] as const;
export type Locale = (typeof LOCALES)[number];
