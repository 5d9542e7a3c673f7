/** Filtering for the quality-control gallery over stored labels. */
import { AnnotationRecord, CATEGORY_NAMES } from "./api.js";

export type ReviewFilter = "any" | (typeof CATEGORY_NAMES)[number];

export function matchesFilter(record: AnnotationRecord, filter: ReviewFilter): boolean {
  if (filter === "any") return record.flags.some(Boolean);
  const idx = CATEGORY_NAMES.indexOf(filter);
  if (idx < 0) throw new Error(`unknown filter ${filter}`);
  return record.flags[idx];
}
