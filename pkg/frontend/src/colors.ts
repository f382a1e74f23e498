import type { Category } from "./types.js";

/**
 * Fixed category -> color mapping. Machine spans render with a dashed
 * outline on top of the same fill until they are confirmed.
 */
export const CATEGORY_COLORS: Record<Category, string> = {
  PERSON: "#ffd54f",
  ADDRESS: "#a5d6a7",
  DOB: "#90caf9",
  IDN: "#ef9a9a",
  PHONE: "#ce93d8",
};

export const CATEGORIES: Category[] = [
  "PERSON",
  "ADDRESS",
  "DOB",
  "IDN",
  "PHONE",
];

/** Keyboard shortcut (1-5) per category, in the order above. */
export function categoryForKey(key: string): Category | null {
  const index = Number.parseInt(key, 10) - 1;
  return index >= 0 && index < CATEGORIES.length ? CATEGORIES[index] : null;
}
