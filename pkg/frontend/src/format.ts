/** Pure view-model helpers shared by the DOM layer and the tests. */

import type { CatalogRow, Demographics } from "./types.js";

/** Group catalog rows by kind, preserving catalog order inside each group
 * and ordering groups by their first appearance. */
export function groupByKind(rows: CatalogRow[]): Array<{ kind: string; rows: CatalogRow[] }> {
  const groups: Array<{ kind: string; rows: CatalogRow[] }> = [];
  const index = new Map<string, number>();
  for (const row of rows) {
    const at = index.get(row.kind);
    if (at === undefined) {
      index.set(row.kind, groups.length);
      groups.push({ kind: row.kind, rows: [row] });
    } else {
      groups[at].rows.push(row);
    }
  }
  return groups;
}

export function patientLabel(demographics: Demographics): string {
  const name = [...demographics.given_names, demographics.family_name].join(" ").trim();
  return `${name || "Unknown patient"} (${demographics.administrative_gender}, ${demographics.age_years})`;
}

export function kindCountsLabel(counts: Record<string, number> | undefined): string {
  if (!counts || Object.keys(counts).length === 0) {
    return "";
  }
  return Object.entries(counts)
    .map(([kind, count]) => `${kind}: ${count}`)
    .join(" · ");
}

/** Word-count badge text; the server guarantees the 100-word cap. */
export function wordBadge(wordCount: number, unit: string): string {
  return `${wordCount} ${unit} / 100`;
}
