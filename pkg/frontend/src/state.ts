/**
 * Workspace document model, mutation reducer, and canonical serialization.
 *
 * This is a faithful port of the server's reducer: given the same document
 * and the same mutation it yields the same next document, byte-identical
 * under `canonicalJson`. The replica leans on that equivalence to apply
 * confirmed mutations locally instead of refetching state, and convergence
 * can be checked by comparing canonical strings.
 */

export const FORMAT_VERSION = 1;
export const PAGE_MAIN = "MAIN";
export const MAX_NOTE_TEXT_LEN = 2000;

export const PROVENANCE_MANUAL = "manual";
export const PROVENANCES = new Set([
  "manual",
  "goal-decomposition",
  "expansion-hint",
  "discussion-extraction",
]);

export const SCOPE_KINDS = new Set(["global", "selected", "customized"]);

/** Closed relation catalog; the overly generic "Related to" is banned. */
export const RELATION_TYPES: readonly string[] = [
  "Is a",
  "Part of",
  "Used for",
  "Capable of",
  "At location",
  "Has a",
  "Desires",
  "Causes",
  "Has property",
  "Synonym",
  "Antonym",
  "Derived from",
  "Instance of",
];

const RELATION_TYPE_SET = new Set(RELATION_TYPES);

export function isValidRelationType(value: string): boolean {
  return RELATION_TYPE_SET.has(value);
}

// --- document shapes ------------------------------------------------------

export interface NoteDoc {
  id: string;
  author: string;
  text: string;
  x: number;
  y: number;
  page: string;
  group: string | null;
  provenance: string;
  createdAtRevision: number;
  editedAtRevision: number;
}

export interface GroupDoc {
  id: string;
  title: string;
  page: string;
  parent: string | null;
  memberNotes: string[];
  rationale: string | null;
  x: number;
  y: number;
}

export interface AffinityDoc {
  groupName: string;
  groupDescription: string;
}

export interface LensScopeDoc {
  kind: string;
  noteIds: string[];
  instruction: string;
}

export interface LensDoc {
  id: string;
  name: string;
  description: string;
  affinities: AffinityDoc[];
  scope: LensScopeDoc;
  createdAtRevision: number;
  refinementIncomplete: boolean;
}

export interface LensPageDoc {
  assignment: Record<string, string | null>;
  rationales: Record<string, string>;
  lastRegroupRevision: number;
}

export interface InstalledLensDoc {
  lens: LensDoc;
  page: LensPageDoc;
}

export interface RelationHintDoc {
  source: string;
  target: string;
  relationType: string;
  explanation: string;
  confidence: number;
  generatedAtRevision: number;
}

export interface SettingsDoc {
  relationHintsEnabled: boolean;
  crossUserOnly: boolean;
  hintRefreshIntervalMs: number;
  confidenceThreshold: number;
  similarityThreshold: number;
  relevanceThreshold: number;
  maxHintsPerRefresh: number;
}

export interface WorkspaceDoc {
  formatVersion: number;
  id: string;
  revision: number;
  users: string[];
  notes: Record<string, NoteDoc>;
  groups: Record<string, GroupDoc>;
  lenses: Record<string, InstalledLensDoc>;
  relationHints: RelationHintDoc[];
  settings: SettingsDoc;
  activeRecording: string | null;
}

export interface MutationWire {
  kind: string;
  actor: string;
  payload: Record<string, unknown>;
}

export type EventDoc = Record<string, unknown>;

export function defaultSettings(): SettingsDoc {
  return {
    relationHintsEnabled: false,
    crossUserOnly: false,
    hintRefreshIntervalMs: 10000,
    confidenceThreshold: 0.6,
    similarityThreshold: 0.6,
    relevanceThreshold: 0.6,
    maxHintsPerRefresh: 10,
  };
}

export function emptyDoc(workspaceId: string): WorkspaceDoc {
  return {
    formatVersion: FORMAT_VERSION,
    id: workspaceId,
    revision: 0,
    users: [],
    notes: {},
    groups: {},
    lenses: {},
    relationHints: [],
    settings: defaultSettings(),
    activeRecording: null,
  };
}

// --- errors ----------------------------------------------------------------

export class MutationError extends Error {
  readonly code: string;

  constructor(code: string, detail: string) {
    super(detail);
    this.code = code;
    this.name = "MutationError";
  }
}

const inv = (detail: string) => new MutationError("invariant-violation", detail);
const unknownRef = (detail: string) => new MutationError("unknown-reference", detail);

// --- payload field helpers --------------------------------------------------

type Payload = Record<string, unknown>;

function hasOwn(obj: Payload, key: string): boolean {
  return Object.prototype.hasOwnProperty.call(obj, key);
}

function isPlainObject(v: unknown): v is Record<string, unknown> {
  return typeof v === "object" && v !== null && !Array.isArray(v);
}

/** Matches the server's integer check, which also admits booleans. */
function isServerInt(v: unknown): boolean {
  return typeof v === "boolean" || (typeof v === "number" && Number.isInteger(v));
}

function strField(p: Payload, key: string): string {
  const v = p[key];
  if (typeof v !== "string" || !v) throw inv(`missing or invalid field '${key}'`);
  return v;
}

function anyStrField(p: Payload, key: string): string {
  const v = p[key];
  if (typeof v !== "string") throw inv(`missing or invalid field '${key}'`);
  return v;
}

function numField(p: Payload, key: string): number {
  const v = p[key];
  if (typeof v !== "number" || !Number.isFinite(v)) {
    throw inv(`field '${key}' must be a finite number`);
  }
  return v;
}

function noteText(p: Payload, key = "text"): string {
  const v = p[key];
  if (typeof v !== "string") throw inv(`missing or invalid field '${key}'`);
  if (!v.trim()) throw new MutationError("empty-text", "note text must be non-empty");
  // code points, not UTF-16 units, so astral characters count once
  if ([...v].length > MAX_NOTE_TEXT_LEN) throw inv(`note text exceeds ${MAX_NOTE_TEXT_LEN} characters`);
  return v;
}

function getNote(doc: WorkspaceDoc, noteId: unknown): NoteDoc {
  const note = typeof noteId === "string" ? doc.notes[noteId] : undefined;
  if (note === undefined) throw unknownRef(`no such note: ${noteId}`);
  return note;
}

function getGroup(doc: WorkspaceDoc, groupId: unknown): GroupDoc {
  const group = typeof groupId === "string" ? doc.groups[groupId] : undefined;
  if (group === undefined) throw unknownRef(`no such group: ${groupId}`);
  return group;
}

function pageExists(doc: WorkspaceDoc, page: string): boolean {
  return page === PAGE_MAIN || hasOwn(doc.lenses, page);
}

function withoutMember(doc: WorkspaceDoc, groupId: string | null, noteId: string): void {
  if (groupId === null || !hasOwn(doc.groups, groupId)) return;
  const g = doc.groups[groupId];
  const at = g.memberNotes.indexOf(noteId);
  if (at >= 0) g.memberNotes = g.memberNotes.filter((n) => n !== noteId);
}

/**
 * Mirrors the server's string coercion for loosely typed payload values.
 * Strings pass through; other JSON scalars take the server's text form.
 */
function coerceStr(v: unknown): string {
  if (typeof v === "string") return v;
  if (v === null) return "None";
  if (v === true) return "True";
  if (v === false) return "False";
  if (typeof v === "number") return String(v);
  return JSON.stringify(v);
}

/** Truthiness matching the server: empty collections and "" are false. */
function serverTruthy(v: unknown): boolean {
  if (v === null || v === undefined || v === false || v === 0 || v === "") return false;
  if (Array.isArray(v)) return v.length > 0;
  if (typeof v === "object") return Object.keys(v as object).length > 0;
  return true;
}

/** Code-point string order, matching the server's sort. */
export function codePointCompare(a: string, b: string): number {
  let i = 0;
  let j = 0;
  while (i < a.length && j < b.length) {
    const ca = a.codePointAt(i)!;
    const cb = b.codePointAt(j)!;
    if (ca !== cb) return ca - cb;
    i += ca > 0xffff ? 2 : 1;
    j += cb > 0xffff ? 2 : 1;
  }
  return a.length - i - (b.length - j);
}

function sortedKeys(obj: Record<string, unknown>): string[] {
  return Object.keys(obj).sort(codePointCompare);
}

// --- handlers ----------------------------------------------------------------

type Handler = (doc: WorkspaceDoc, actor: string, p: Payload, rev: number) => EventDoc[];

function createNote(doc: WorkspaceDoc, actor: string, p: Payload, rev: number): EventDoc[] {
  const noteId = strField(p, "noteId");
  if (hasOwn(doc.notes, noteId)) throw inv(`note id already in use: ${noteId}`);
  const text = noteText(p);
  const x = numField(p, "x");
  const y = numField(p, "y");
  const page = hasOwn(p, "page") ? p.page : PAGE_MAIN;
  if (typeof page !== "string" || !pageExists(doc, page)) {
    throw unknownRef(`no such page: ${page}`);
  }
  const provenance = hasOwn(p, "provenance") ? p.provenance : PROVENANCE_MANUAL;
  if (typeof provenance !== "string" || !PROVENANCES.has(provenance)) {
    throw inv(`invalid provenance: ${JSON.stringify(provenance)}`);
  }
  const groupId = p.group === undefined ? null : (p.group as string | null);
  if (groupId !== null) {
    const group = getGroup(doc, groupId);
    if (group.page !== page) throw inv("note and group must live on the same page");
    group.memberNotes.push(noteId);
  }
  doc.notes[noteId] = {
    id: noteId,
    author: actor,
    text,
    x,
    y,
    page,
    group: groupId,
    provenance,
    createdAtRevision: rev,
    editedAtRevision: rev,
  };
  return [{ event: "note-created", noteId, author: actor }];
}

function editNoteText(doc: WorkspaceDoc, actor: string, p: Payload, rev: number): EventDoc[] {
  const note = getNote(doc, strField(p, "noteId"));
  const text = noteText(p);
  const originalText = note.text;
  note.text = text;
  note.editedAtRevision = rev;
  return [{ event: "note-edited", noteId: note.id, originalText, text }];
}

function moveNote(doc: WorkspaceDoc, actor: string, p: Payload): EventDoc[] {
  const note = getNote(doc, strField(p, "noteId"));
  const x = numField(p, "x");
  const y = numField(p, "y");
  note.x = x;
  note.y = y;
  return [{ event: "note-moved", noteId: note.id, x, y }];
}

function deleteNote(doc: WorkspaceDoc, actor: string, p: Payload): EventDoc[] {
  const note = getNote(doc, strField(p, "noteId"));
  delete doc.notes[note.id];
  withoutMember(doc, note.group, note.id);
  const events: EventDoc[] = [{ event: "note-deleted", noteId: note.id }];

  // purge from every lens page so no dangling reference survives
  for (const lensId of sortedKeys(doc.lenses)) {
    const il = doc.lenses[lensId];
    if (hasOwn(il.page.assignment, note.id)) {
      delete il.page.assignment[note.id];
      events.push({ event: "assignment-pruned", lensId, noteId: note.id });
    }
  }

  const before = doc.relationHints.length;
  doc.relationHints = doc.relationHints.filter(
    (h) => h.source !== note.id && h.target !== note.id,
  );
  if (doc.relationHints.length !== before) {
    events.push({ event: "hints-pruned", removed: before - doc.relationHints.length });
  }
  return events;
}

function createGroup(doc: WorkspaceDoc, actor: string, p: Payload): EventDoc[] {
  const groupId = strField(p, "groupId");
  if (hasOwn(doc.groups, groupId)) throw inv(`group id already in use: ${groupId}`);
  const title = anyStrField(p, "title");
  const page = hasOwn(p, "page") ? p.page : PAGE_MAIN;
  if (typeof page !== "string" || !pageExists(doc, page)) {
    throw unknownRef(`no such page: ${page}`);
  }
  const parent = p.parent === undefined ? null : (p.parent as string | null);
  if (parent !== null) {
    const parentGroup = getGroup(doc, parent);
    if (parentGroup.page !== page) throw inv("subgroup must live on its parent's page");
  }
  const x = hasOwn(p, "x") ? numField(p, "x") : 0.0;
  const y = hasOwn(p, "y") ? numField(p, "y") : 0.0;
  const rationale = p.rationale === undefined ? null : (p.rationale as string | null);
  if (rationale !== null && typeof rationale !== "string") {
    throw inv("rationale must be a string");
  }
  doc.groups[groupId] = {
    id: groupId,
    title,
    page,
    parent,
    memberNotes: [],
    rationale,
    x,
    y,
  };
  return [{ event: "group-created", groupId, title }];
}

function renameGroup(doc: WorkspaceDoc, actor: string, p: Payload): EventDoc[] {
  const group = getGroup(doc, strField(p, "groupId"));
  const title = anyStrField(p, "title");
  group.title = title;
  return [{ event: "group-renamed", groupId: group.id, title }];
}

function assignNoteToGroup(doc: WorkspaceDoc, actor: string, p: Payload): EventDoc[] {
  const note = getNote(doc, strField(p, "noteId"));
  const group = getGroup(doc, strField(p, "groupId"));
  if (note.page !== group.page) throw inv("note and group must live on the same page");
  const previous = note.group;
  if (previous === group.id) return [];
  withoutMember(doc, previous, note.id);
  if (!group.memberNotes.includes(note.id)) group.memberNotes.push(note.id);
  note.group = group.id;
  return [{ event: "note-assigned", noteId: note.id, groupId: group.id, previousGroup: previous }];
}

function removeNoteFromGroup(doc: WorkspaceDoc, actor: string, p: Payload): EventDoc[] {
  const note = getNote(doc, strField(p, "noteId"));
  if (note.group === null) return [];
  const previousGroup = note.group;
  withoutMember(doc, note.group, note.id);
  note.group = null;
  return [{ event: "note-ungrouped", noteId: note.id, previousGroup }];
}

function promoteSubgroup(doc: WorkspaceDoc, actor: string, p: Payload): EventDoc[] {
  const group = getGroup(doc, strField(p, "groupId"));
  if (group.parent === null) {
    throw new MutationError("not-a-subgroup", `group ${group.id} is already top-level`);
  }
  const previousParent = group.parent;
  group.parent = null;
  return [{ event: "group-promoted", groupId: group.id, previousParent }];
}

function deleteGroup(doc: WorkspaceDoc, actor: string, p: Payload): EventDoc[] {
  const group = getGroup(doc, strField(p, "groupId"));
  delete doc.groups[group.id];
  const events: EventDoc[] = [{ event: "group-deleted", groupId: group.id }];
  // members are orphaned, not deleted: notes are the primary artifact
  for (const noteId of group.memberNotes) {
    if (hasOwn(doc.notes, noteId)) {
      doc.notes[noteId].group = null;
      events.push({ event: "note-ungrouped", noteId, previousGroup: group.id });
    }
  }
  // subgroups climb one level rather than being destroyed
  for (const gid of sortedKeys(doc.groups)) {
    if (doc.groups[gid].parent === group.id) {
      doc.groups[gid].parent = group.parent;
      events.push({ event: "group-reparented", groupId: gid, parent: group.parent });
    }
  }
  return events;
}

const SETTINGS_KEYS: Record<string, { attr: keyof SettingsDoc; kind: "bool" | "int" | "float" }> = {
  relationHintsEnabled: { attr: "relationHintsEnabled", kind: "bool" },
  crossUserOnly: { attr: "crossUserOnly", kind: "bool" },
  hintRefreshIntervalMs: { attr: "hintRefreshIntervalMs", kind: "int" },
  confidenceThreshold: { attr: "confidenceThreshold", kind: "float" },
  similarityThreshold: { attr: "similarityThreshold", kind: "float" },
  relevanceThreshold: { attr: "relevanceThreshold", kind: "float" },
  maxHintsPerRefresh: { attr: "maxHintsPerRefresh", kind: "int" },
};

function validateSettings(s: SettingsDoc): void {
  for (const name of ["confidenceThreshold", "similarityThreshold", "relevanceThreshold"] as const) {
    const v = s[name];
    if (typeof v !== "number" || !(v >= 0.0 && v <= 1.0)) {
      throw inv(`${name} must be in [0,1]`);
    }
  }
  if (s.hintRefreshIntervalMs <= 0) throw inv("hint_refresh_interval_ms must be > 0");
  if (s.maxHintsPerRefresh < 1) throw inv("max_hints_per_refresh must be >= 1");
}

function setSettings(doc: WorkspaceDoc, actor: string, p: Payload): EventDoc[] {
  const changes = p.changes;
  if (!isPlainObject(changes) || Object.keys(changes).length === 0) {
    throw inv("SetSettings requires a non-empty changes object");
  }
  const next: SettingsDoc = { ...doc.settings };
  for (const [key, value] of Object.entries(changes)) {
    const spec = SETTINGS_KEYS[key];
    if (spec === undefined) throw inv(`unknown setting: '${key}'`);
    if (spec.kind === "bool") {
      if (typeof value !== "boolean") throw inv(`setting ${key} must be a boolean`);
    } else if (spec.kind === "int") {
      if (typeof value !== "number" || !Number.isInteger(value)) {
        throw inv(`setting ${key} must be an integer`);
      }
    } else if (typeof value !== "number") {
      throw inv(`setting ${key} must be a number`);
    }
    (next as unknown as Record<string, unknown>)[spec.attr] = value;
  }
  validateSettings(next);
  doc.settings = next;
  const events: EventDoc[] = [{ event: "settings-changed", changes: { ...changes } }];
  if (!next.relationHintsEnabled && doc.relationHints.length > 0) {
    doc.relationHints = [];
    events.push({ event: "hints-cleared" });
  }
  return events;
}

function parseLens(lensDoc: unknown, rev: number): LensDoc {
  if (!isPlainObject(lensDoc)) throw inv("lens must be an object");
  const affinitiesDoc = lensDoc.affinities;
  if (!Array.isArray(affinitiesDoc) || affinitiesDoc.length < 2) {
    throw inv("a lens needs at least two affinities");
  }
  const affinities: AffinityDoc[] = [];
  const seen = new Set<string>();
  for (const a of affinitiesDoc) {
    if (!isPlainObject(a) || typeof a.groupName !== "string" || !a.groupName) {
      throw inv("each affinity needs a groupName");
    }
    if (seen.has(a.groupName)) throw inv(`duplicate affinity name: ${a.groupName}`);
    seen.add(a.groupName);
    affinities.push({
      groupName: a.groupName,
      groupDescription: (hasOwn(a, "groupDescription") ? a.groupDescription : "") as string,
    });
  }
  const scopeDoc = serverTruthy(lensDoc.scope) ? (lensDoc.scope as Record<string, unknown>) : {};
  const kind = hasOwn(scopeDoc, "kind") ? scopeDoc.kind : "global";
  if (typeof kind !== "string" || !SCOPE_KINDS.has(kind)) {
    throw inv(`invalid lens scope kind: ${JSON.stringify(kind)}`);
  }
  const noteIds = serverTruthy(scopeDoc.noteIds) ? scopeDoc.noteIds : [];
  if (!Array.isArray(noteIds) || !noteIds.every((n) => typeof n === "string")) {
    throw inv("scope noteIds must be a list of ids");
  }
  return {
    id: strField(lensDoc, "id"),
    name: strField(lensDoc, "name"),
    description: (hasOwn(lensDoc, "description") ? lensDoc.description : "") as string,
    affinities,
    scope: {
      kind,
      noteIds: [...(noteIds as string[])],
      instruction: (hasOwn(scopeDoc, "instruction") ? scopeDoc.instruction : "") as string,
    },
    createdAtRevision: rev,
    refinementIncomplete: serverTruthy(lensDoc.refinementIncomplete),
  };
}

/** Validate an assignment map, dropping notes that vanished mid-flight. */
function cleanAssignment(
  doc: WorkspaceDoc,
  assignmentDoc: unknown,
  validGroups: Set<string>,
): Record<string, string | null> {
  if (!isPlainObject(assignmentDoc)) throw inv("assignment must be an object");
  const assignment: Record<string, string | null> = {};
  for (const noteId of sortedKeys(assignmentDoc)) {
    const value = assignmentDoc[noteId];
    if (!hasOwn(doc.notes, noteId)) continue; // deleted since the engine snapshotted
    if (value !== null && !(typeof value === "string" && validGroups.has(value))) {
      throw inv(`assignment references unknown affinity ${JSON.stringify(value)}`);
    }
    assignment[noteId] = value;
  }
  return assignment;
}

function sortedRationales(rationales: Record<string, unknown>): Record<string, string> {
  const out: Record<string, string> = {};
  for (const k of sortedKeys(rationales)) out[k] = coerceStr(rationales[k]);
  return out;
}

function installLensPage(doc: WorkspaceDoc, actor: string, p: Payload, rev: number): EventDoc[] {
  const lens = parseLens(p.lens, rev);
  if (hasOwn(doc.lenses, lens.id)) throw inv(`lens id already in use: ${lens.id}`);
  for (const il of Object.values(doc.lenses)) {
    if (il.lens.name === lens.name) {
      throw new MutationError("duplicate-lens-name", `a lens named '${lens.name}' is already installed`);
    }
  }
  const valid = new Set(lens.affinities.map((a) => a.groupName));
  const assignment = cleanAssignment(doc, hasOwn(p, "assignment") ? p.assignment : {}, valid);
  const rationales = hasOwn(p, "rationales") ? p.rationales : {};
  if (!isPlainObject(rationales)) throw inv("rationales must be an object");
  const baseRevision = hasOwn(p, "baseRevision") ? p.baseRevision : doc.revision;
  if (!isServerInt(baseRevision)) throw inv("baseRevision must be an integer");
  doc.lenses[lens.id] = {
    lens,
    page: {
      assignment,
      rationales: sortedRationales(rationales),
      lastRegroupRevision: baseRevision as number,
    },
  };
  return [{ event: "lens-installed", lensId: lens.id, name: lens.name }];
}

function replaceGrouping(doc: WorkspaceDoc, actor: string, p: Payload): EventDoc[] {
  const lensId = strField(p, "lensId");
  const il = doc.lenses[lensId];
  if (il === undefined) throw unknownRef(`no such lens: ${lensId}`);
  const valid = new Set(il.lens.affinities.map((a) => a.groupName));
  const assignment = cleanAssignment(doc, hasOwn(p, "assignment") ? p.assignment : {}, valid);
  let rationales: unknown = hasOwn(p, "rationales") ? p.rationales : null;
  if (rationales === null) rationales = { ...il.page.rationales };
  if (!isPlainObject(rationales)) throw inv("rationales must be an object");
  const baseRevision = hasOwn(p, "baseRevision") ? p.baseRevision : doc.revision;
  if (!isServerInt(baseRevision)) throw inv("baseRevision must be an integer");
  il.page = {
    assignment,
    rationales: sortedRationales(rationales),
    lastRegroupRevision: baseRevision as number,
  };
  return [{ event: "grouping-replaced", lensId }];
}

function pairKey(a: string, b: string): string {
  return a < b ? `${a}\u0000${b}` : `${b}\u0000${a}`;
}

function replaceRelationHints(doc: WorkspaceDoc, actor: string, p: Payload): EventDoc[] {
  const hintsDoc = p.hints;
  if (!Array.isArray(hintsDoc)) throw inv("hints must be a list");
  const baseRevision = hasOwn(p, "baseRevision") ? p.baseRevision : doc.revision;
  if (!isServerInt(baseRevision)) throw inv("baseRevision must be an integer");
  const threshold = doc.settings.confidenceThreshold;
  const kept: RelationHintDoc[] = [];
  const seenPairs = new Set<string>();
  for (const hint of hintsDoc) {
    if (!isPlainObject(hint)) throw inv("each hint must be an object");
    const source = strField(hint, "source");
    const target = strField(hint, "target");
    const rtype = strField(hint, "relationType");
    const confidence = hint.confidence;
    if (typeof confidence !== "number") throw inv("hint confidence must be a number");
    if (!(confidence >= 0.0 && confidence <= 1.0)) throw inv("hint confidence must be in [0,1]");
    if (source === target) throw inv("a hint cannot relate a note to itself");
    if (!isValidRelationType(rtype)) throw inv(`relation type not in catalog: '${rtype}'`);
    if (!hasOwn(doc.notes, source) || !hasOwn(doc.notes, target)) continue; // vanished mid-flight
    const pair = pairKey(source, target);
    if (seenPairs.has(pair)) throw inv("duplicate hint for the same note pair");
    seenPairs.add(pair);
    if (confidence < threshold) continue;
    kept.push({
      source,
      target,
      relationType: rtype,
      explanation: coerceStr(hasOwn(hint, "explanation") ? hint.explanation : ""),
      confidence,
      generatedAtRevision: baseRevision as number,
    });
  }
  kept.sort(
    (a, b) =>
      b.confidence - a.confidence ||
      codePointCompare(a.source, b.source) ||
      codePointCompare(a.target, b.target),
  );
  const capped = kept.slice(0, doc.settings.maxHintsPerRefresh);
  capped.sort(
    (a, b) =>
      codePointCompare(a.source, b.source) ||
      codePointCompare(a.target, b.target) ||
      codePointCompare(a.relationType, b.relationType),
  );
  doc.relationHints = capped;
  return [{ event: "hints-replaced", count: capped.length }];
}

function setRecording(doc: WorkspaceDoc, actor: string, p: Payload): EventDoc[] {
  if (!hasOwn(p, "recordingId")) throw inv("SetRecording requires a recordingId field");
  const recordingId = p.recordingId;
  if (recordingId === null) {
    if (doc.activeRecording === null) {
      throw new MutationError("no-active-recording", "no recording to stop");
    }
    doc.activeRecording = null;
    return [{ event: "recording-changed", recordingId: null }];
  }
  if (typeof recordingId !== "string" || !recordingId) {
    throw inv("recordingId must be a non-empty string or null");
  }
  if (doc.activeRecording !== null) {
    throw new MutationError(
      "recording-already-active",
      `recording ${doc.activeRecording} is active`,
    );
  }
  doc.activeRecording = recordingId;
  return [{ event: "recording-changed", recordingId }];
}

const HANDLERS: Record<string, Handler> = {
  CreateNote: createNote,
  EditNoteText: editNoteText,
  MoveNote: moveNote,
  DeleteNote: deleteNote,
  CreateGroup: createGroup,
  RenameGroup: renameGroup,
  AssignNoteToGroup: assignNoteToGroup,
  RemoveNoteFromGroup: removeNoteFromGroup,
  PromoteSubgroup: promoteSubgroup,
  DeleteGroup: deleteGroup,
  SetSettings: setSettings,
  InstallLensPage: installLensPage,
  ReplaceGrouping: replaceGrouping,
  ReplaceRelationHints: replaceRelationHints,
  SetRecording: setRecording,
};

export const MUTATION_KINDS: readonly string[] = Object.keys(HANDLERS);

/**
 * Apply one mutation, returning the next document and its events.
 *
 * Throws MutationError and leaves the input untouched when the mutation is
 * invalid. On success the revision advances by exactly 1 and the actor
 * joins the first-seen user roster — even when the handler was a no-op.
 */
export function applyMutation(
  doc: WorkspaceDoc,
  m: MutationWire,
): { doc: WorkspaceDoc; events: EventDoc[] } {
  const handler = HANDLERS[m.kind];
  if (handler === undefined) throw inv(`unknown mutation kind: ${JSON.stringify(m.kind)}`);
  if (typeof m.actor !== "string" || !m.actor) {
    throw inv("mutation actor must be a non-empty string");
  }
  const payload = m.payload === undefined ? {} : m.payload;
  if (!isPlainObject(payload)) throw inv("mutation payload must be an object");
  const next = structuredClone(doc);
  const rev = doc.revision + 1;
  const events = handler(next, m.actor, payload, rev);
  next.revision = rev;
  if (!next.users.includes(m.actor)) next.users.push(m.actor);
  return { doc: next, events };
}

// --- canonical serialization --------------------------------------------------

/**
 * Document fields that the server stores as floating-point numbers. The
 * server renders those with a trailing ".0" when integral ("10.0"), which
 * JSON.stringify never does, so the canonical serializer needs to know
 * which keys are float-typed.
 */
const FLOAT_KEYS = new Set([
  "x",
  "y",
  "confidence",
  "confidenceThreshold",
  "similarityThreshold",
  "relevanceThreshold",
]);

/**
 * Render a float the way the server's JSON encoder does: shortest
 * round-trip digits, plain notation for decimal exponents in [-4, 16),
 * exponential with a two-digit exponent otherwise, and a trailing ".0"
 * on integral values.
 */
export function floatRepr(v: number): string {
  if (!Number.isFinite(v)) throw new Error(`cannot serialize non-finite number: ${v}`);
  const sign = v < 0 || Object.is(v, -0) ? "-" : "";
  const abs = Math.abs(v);
  if (Number.isInteger(abs) && abs < 1e16) {
    return `${sign}${abs.toFixed(1)}`;
  }
  // toExponential() without arguments gives the shortest round-trip digits
  const [mantissa, expStr] = abs.toExponential().split("e");
  const digits = mantissa.replace(".", "");
  const exp = parseInt(expStr, 10);
  if (exp >= -4 && exp < 16) {
    if (exp >= 0) {
      const intPart = digits.padEnd(exp + 1, "0").slice(0, exp + 1);
      const frac = digits.slice(exp + 1) || "0";
      return `${sign}${intPart}.${frac}`;
    }
    return `${sign}0.${"0".repeat(-exp - 1)}${digits}`;
  }
  const m = digits.length > 1 ? `${digits[0]}.${digits.slice(1)}` : digits;
  const expSign = exp < 0 ? "-" : "+";
  const expDigits = String(Math.abs(exp)).padStart(2, "0");
  return `${sign}${m}e${expSign}${expDigits}`;
}

function canonicalValue(value: unknown, key: string | null, out: string[]): void {
  if (value === null) {
    out.push("null");
  } else if (value === true) {
    out.push("true");
  } else if (value === false) {
    out.push("false");
  } else if (typeof value === "number") {
    if (key !== null && FLOAT_KEYS.has(key)) {
      out.push(floatRepr(value));
    } else if (Number.isInteger(value)) {
      out.push(String(value));
    } else {
      out.push(floatRepr(value));
    }
  } else if (typeof value === "string") {
    out.push(JSON.stringify(value));
  } else if (Array.isArray(value)) {
    out.push("[");
    for (let i = 0; i < value.length; i++) {
      if (i > 0) out.push(",");
      canonicalValue(value[i], key, out);
    }
    out.push("]");
  } else if (typeof value === "object") {
    const obj = value as Record<string, unknown>;
    out.push("{");
    const keys = sortedKeys(obj);
    for (let i = 0; i < keys.length; i++) {
      if (i > 0) out.push(",");
      out.push(JSON.stringify(keys[i]), ":");
      canonicalValue(obj[keys[i]], keys[i], out);
    }
    out.push("}");
  } else {
    throw new Error(`cannot serialize value of type ${typeof value}`);
  }
}

/**
 * Serialize a document to the server's canonical form: sorted keys,
 * compact separators, raw (non-ASCII-escaped) text, float-typed fields
 * rendered with server float formatting. Byte-identical to the server's
 * output for the same document.
 */
export function canonicalJson(doc: unknown): string {
  const out: string[] = [];
  canonicalValue(doc, null, out);
  return out.join("");
}
