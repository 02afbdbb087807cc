/**
 * Application controller: one replica, one connection, and the UI-facing
 * operations the panels and canvas call. Holds everything the DOM renders
 * from (current page, AI results, transcripts, recording state) but has no
 * DOM dependencies itself, so the interaction rules — switch to a lens page
 * emits exactly one regroup request, results older than the current
 * revision are flagged stale, and state changes only ever travel through
 * protocol messages — are all testable headlessly.
 */

import { Connection, type ConnectionOptions, type ConnectionStatus } from "./connection.js";
import {
  aiRequestMessage,
  audioChunkMessage,
  startRecordingMessage,
  stopRecordingMessage,
  type ServerMessage,
} from "./protocol.js";
import { ClientReplica, type ReplicaEvent } from "./replica.js";
import { PAGE_MAIN, type WorkspaceDoc } from "./state.js";

export interface AiResultEntry {
  kind: string;
  payload: Record<string, unknown>;
  baseRevision: number;
  requestId: string | null;
}

export interface TranscriptSegment {
  recordingId: string;
  index: number;
  text: string;
  startMs: number;
  endMs: number;
}

export interface InlineNotice {
  code: string;
  detail: string;
}

export interface LensCandidate {
  name: string;
  description: string;
  groups: { name: string; description: string }[];
}

export interface SnapshotInfo {
  name: string;
  revision?: number;
  savedAtMs?: number;
  [key: string]: unknown;
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface BoardAppOptions {
  user: string;
  workspace: string | null;
  wsUrl: string;
  apiBase?: string;
  createSocket?: ConnectionOptions["createSocket"];
  fetchImpl?: FetchLike;
  pingIntervalMs?: number;
  reconnect?: boolean;
}

const MAX_RESULTS = 50;
const MAX_NOTICES = 20;

export class BoardApp {
  readonly replica: ClientReplica;
  readonly connection: Connection;

  /** Page being shown: MAIN or an installed lens id. */
  page: string = PAGE_MAIN;
  status: ConnectionStatus = "connecting";
  /** Newest first. */
  aiResults: AiResultEntry[] = [];
  /** Newest first; provider failures and rejected mutations land here. */
  notices: InlineNotice[] = [];
  transcripts = new Map<string, TranscriptSegment[]>();
  /** Lens candidates from the latest generateLenses result. */
  lensCandidates: LensCandidate[] = [];
  recording = false;
  /** Note the side panel's tools act on (canvas click selects). */
  selectedNoteId: string | null = null;
  /** Group the side panel's tools act on. */
  selectedGroupId: string | null = null;

  private readonly fetchImpl: FetchLike;
  private readonly apiBase: string;
  private nextRequestId = 1;
  private listeners = new Set<() => void>();

  constructor(opts: BoardAppOptions) {
    this.replica = new ClientReplica(opts.user);
    this.fetchImpl = opts.fetchImpl ?? ((url, init) => fetch(url, init));
    this.apiBase = opts.apiBase ?? "";
    this.connection = new Connection({
      url: opts.wsUrl,
      user: opts.user,
      workspace: opts.workspace,
      createSocket: opts.createSocket,
      pingIntervalMs: opts.pingIntervalMs,
      reconnect: opts.reconnect,
      onMessage: (msg) => this.onServerMessage(msg),
      onStatus: (status) => {
        this.status = status;
        this.notify();
      },
    });
  }

  start(): void {
    this.connection.connect();
  }

  stop(): void {
    this.connection.close();
  }

  subscribe(listener: () => void): () => void {
    this.listeners.add(listener);
    return () => this.listeners.delete(listener);
  }

  /** The document the canvas renders (confirmed + optimistic). */
  view(): WorkspaceDoc | null {
    return this.replica.view();
  }

  get workspaceId(): string | null {
    return this.replica.confirmed?.id ?? null;
  }

  // --- message pump -------------------------------------------------------

  private onServerMessage(msg: ServerMessage): void {
    switch (msg.type) {
      case "joinSnapshot":
      case "mutationApplied":
      case "ack": {
        const events = this.replica.handleServer(msg);
        this.afterReplicaEvents(events);
        break;
      }
      case "error": {
        const events = this.replica.handleServer(msg);
        this.pushNotice({ code: msg.code, detail: msg.detail });
        this.afterReplicaEvents(events);
        break;
      }
      case "aiResult": {
        this.onAiResult(msg.kind, msg.payload, msg.baseRevision, msg.requestId);
        break;
      }
      case "transcriptSegment": {
        const segments = this.transcripts.get(msg.recordingId) ?? [];
        segments.push({
          recordingId: msg.recordingId,
          index: msg.index,
          text: msg.text,
          startMs: msg.startMs,
          endMs: msg.endMs,
        });
        segments.sort((a, b) => a.index - b.index);
        this.transcripts.set(msg.recordingId, segments);
        break;
      }
      case "pong":
        return; // keepalive only; nothing to render
    }
    this.notify();
  }

  private afterReplicaEvents(events: ReplicaEvent[]): void {
    for (const ev of events) {
      if (ev.type === "rejected") {
        this.pushNotice({ code: ev.code, detail: ev.detail });
      } else if (ev.type === "diverged") {
        // the stream is no longer trustworthy; rejoin for a fresh snapshot
        this.pushNotice({ code: "resync", detail: ev.reason });
        this.connection.refresh();
        break;
      } else if (ev.type === "snapshot") {
        const doc = this.replica.confirmed;
        if (doc !== null && this.page !== PAGE_MAIN && !(this.page in doc.lenses)) {
          this.page = PAGE_MAIN; // the page we were on no longer exists
        }
        if (doc !== null) this.recording = doc.activeRecording !== null;
      } else if (ev.type === "applied") {
        const doc = this.replica.confirmed;
        if (doc !== null) {
          this.recording = doc.activeRecording !== null;
          if (this.page !== PAGE_MAIN && !(this.page in doc.lenses)) this.page = PAGE_MAIN;
        }
      }
    }
    const view = this.replica.view();
    if (view !== null) {
      if (this.selectedNoteId !== null && !(this.selectedNoteId in view.notes)) {
        this.selectedNoteId = null;
      }
      if (this.selectedGroupId !== null && !(this.selectedGroupId in view.groups)) {
        this.selectedGroupId = null;
      }
    }
  }

  private onAiResult(
    kind: string,
    payload: Record<string, unknown>,
    baseRevision: number,
    requestId: string | null,
  ): void {
    this.aiResults.unshift({ kind, payload, baseRevision, requestId });
    if (this.aiResults.length > MAX_RESULTS) this.aiResults.pop();
    if (kind === "generateLenses" && Array.isArray(payload.lenses)) {
      this.lensCandidates = payload.lenses as LensCandidate[];
    }
  }

  private pushNotice(notice: InlineNotice): void {
    this.notices.unshift(notice);
    if (this.notices.length > MAX_NOTICES) this.notices.pop();
  }

  private notify(): void {
    for (const listener of this.listeners) listener();
  }

  // --- mutations ------------------------------------------------------------

  /** Submit one mutation optimistically; all edits funnel through here. */
  submit(kind: string, payload: Record<string, unknown>): void {
    const message = this.replica.prepare(kind, payload);
    this.connection.send(message);
    this.notify();
  }

  createNote(text: string, x: number, y: number): void {
    const payload: Record<string, unknown> = { text, x, y };
    if (this.page !== PAGE_MAIN) payload.page = this.page;
    this.submit("CreateNote", payload);
  }

  moveNote(noteId: string, x: number, y: number): void {
    this.submit("MoveNote", { noteId, x, y });
  }

  editNoteText(noteId: string, text: string): void {
    this.submit("EditNoteText", { noteId, text });
  }

  deleteNote(noteId: string): void {
    this.submit("DeleteNote", { noteId });
  }

  createGroup(title: string, x: number, y: number): void {
    const payload: Record<string, unknown> = { title, x, y };
    if (this.page !== PAGE_MAIN) payload.page = this.page;
    this.submit("CreateGroup", payload);
  }

  assignNoteToGroup(noteId: string, groupId: string): void {
    this.submit("AssignNoteToGroup", { noteId, groupId });
  }

  removeNoteFromGroup(noteId: string): void {
    this.submit("RemoveNoteFromGroup", { noteId });
  }

  renameGroup(groupId: string, title: string): void {
    this.submit("RenameGroup", { groupId, title });
  }

  deleteGroup(groupId: string): void {
    this.submit("DeleteGroup", { groupId });
  }

  changeSettings(changes: Record<string, unknown>): void {
    this.submit("SetSettings", { changes });
  }

  // --- AI requests ------------------------------------------------------------

  /** Send one aiRequest; returns the requestId used to pair the result. */
  request(kind: string, payload: Record<string, unknown> = {}): string {
    const requestId = `rq-${this.nextRequestId++}`;
    this.connection.send(aiRequestMessage(kind, payload, requestId));
    this.notify();
    return requestId;
  }

  decomposeGoal(goal: string): string {
    return this.request("decomposeGoal", { goal });
  }

  expandSubtask(cardId: string): string {
    return this.request("expandSubtask", { cardId });
  }

  expandQuery(noteId: string, query: string): string {
    return this.request("expandQuery", { noteId, query });
  }

  expandRelation(noteId: string, relationType: string): string {
    return this.request("expandRelation", { noteId, relationType });
  }

  applySuggestion(noteId: string, suggestion: string): string {
    return this.request("applySuggestion", { noteId, suggestion });
  }

  addHintAsNote(text: string, sourceNoteId?: string): string {
    const payload: Record<string, unknown> = { text };
    if (sourceNoteId !== undefined) payload.sourceNoteId = sourceNoteId;
    return this.request("addHintAsNote", payload);
  }

  groupDiscussionHints(groupId: string, instruction?: string): string {
    const payload: Record<string, unknown> = { groupId };
    if (instruction !== undefined) payload.instruction = instruction;
    return this.request("groupHints", payload);
  }

  suggestDimensions(groupId: string): string {
    return this.request("suggestDimensions", { groupId });
  }

  hierarchicalGroup(groupId: string, dimensions: string[]): string {
    return this.request("hierarchicalGroup", { groupId, dimensions });
  }

  generateLenses(scope?: Record<string, unknown>): string {
    return this.request("generateLenses", scope === undefined ? {} : { scope });
  }

  installLens(name: string): string {
    return this.request("installLens", { name });
  }

  extractKeyInfo(): string {
    return this.request("extractKeyInfo");
  }

  retrieveRelevant(): string {
    return this.request("retrieveRelevant");
  }

  /** Turn a key-information card into a note on the board. */
  cardToNote(cardId: string): string {
    return this.request("cardToNote", { cardId });
  }

  // --- pages ------------------------------------------------------------------

  /**
   * Switch the visible page. Entering a lens page asks the engine to
   * regroup against the current notes — exactly one request per switch,
   * never one per render.
   */
  switchPage(pageId: string): void {
    if (pageId === this.page) return;
    const doc = this.replica.confirmed;
    if (pageId !== PAGE_MAIN && (doc === null || !(pageId in doc.lenses))) return;
    this.page = pageId;
    if (pageId !== PAGE_MAIN) {
      this.request("regroup", { lensId: pageId });
    }
    this.notify();
  }

  /** True when a result was computed against an older revision. */
  isStale(entry: AiResultEntry): boolean {
    return this.replica.confirmed !== null && entry.baseRevision < this.replica.confirmed.revision;
  }

  // --- selection (UI state only; nothing travels to the server) ----------------

  selectNote(noteId: string | null): void {
    if (this.selectedNoteId === noteId) return;
    this.selectedNoteId = noteId;
    if (noteId !== null) this.selectedGroupId = null;
    this.notify();
  }

  selectGroup(groupId: string | null): void {
    if (this.selectedGroupId === groupId) return;
    this.selectedGroupId = groupId;
    if (groupId !== null) this.selectedNoteId = null;
    this.notify();
  }

  // --- speech -------------------------------------------------------------------

  startRecording(): void {
    this.connection.send(startRecordingMessage());
  }

  stopRecording(): void {
    this.connection.send(stopRecordingMessage());
  }

  sendAudioChunk(audioB64: string): void {
    this.connection.send(audioChunkMessage(audioB64));
  }

  // --- snapshots (HTTP admin API) -------------------------------------------------

  async listSnapshots(): Promise<SnapshotInfo[]> {
    const ws = this.workspaceId;
    if (ws === null) return [];
    const res = await this.fetchImpl(`${this.apiBase}/api/workspaces/${encodeURIComponent(ws)}/snapshots`);
    if (!res.ok) throw new Error(`snapshot list failed: ${res.status}`);
    const body = (await res.json()) as { snapshots: SnapshotInfo[] };
    return body.snapshots;
  }

  async saveSnapshot(name: string, overwrite = false): Promise<void> {
    const ws = this.workspaceId;
    if (ws === null) throw new Error("not joined yet");
    const res = await this.fetchImpl(`${this.apiBase}/api/workspaces/${encodeURIComponent(ws)}/snapshots`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ name, overwrite }),
    });
    if (!res.ok) throw new Error(`snapshot save failed: ${res.status}`);
  }

  /** Load a named snapshot; the refreshed state arrives as a JoinSnapshot. */
  async loadSnapshot(name: string): Promise<void> {
    const ws = this.workspaceId;
    if (ws === null) throw new Error("not joined yet");
    const res = await this.fetchImpl(
      `${this.apiBase}/api/workspaces/${encodeURIComponent(ws)}/snapshots/${encodeURIComponent(name)}/load`,
      { method: "POST" },
    );
    if (!res.ok) throw new Error(`snapshot load failed: ${res.status}`);
  }
}
