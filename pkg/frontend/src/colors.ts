/**
 * Deterministic per-user colors, mirroring the server's palette.
 *
 * A user's color is fixed by their first-seen position in the workspace
 * roster, so every client shows the same color for the same author without
 * any extra coordination.
 */

export const PALETTE: readonly string[] = [
  "#e6194b",
  "#3cb44b",
  "#4363d8",
  "#f58231",
  "#911eb4",
  "#42d4f4",
  "#f032e6",
  "#bfef45",
  "#fabed4",
  "#469990",
  "#9a6324",
  "#808000",
];

/**
 * Color for `user` given the workspace roster (first-seen order). A user
 * not yet in the roster gets the next free slot provisionally, which is
 * the slot the server will assign once their first mutation lands.
 */
export function userColor(roster: readonly string[], user: string): string {
  const index = roster.indexOf(user);
  const slot = index >= 0 ? index : roster.length;
  return PALETTE[slot % PALETTE.length];
}
