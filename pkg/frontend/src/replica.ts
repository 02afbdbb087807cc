/**
 * Client-side replica of one workspace.
 *
 * `confirmed` mirrors the server state exactly: it changes only when a
 * joinSnapshot or mutationApplied arrives, and after every such message it
 * equals the server's state at that revision, byte-for-byte under
 * canonicalJson. Locally submitted mutations are tracked as pending
 * entries keyed by clientSeq and layered on top for the optimistic view;
 * they are cleared when the server confirms (own broadcast, then ack) or
 * rejects them. Mutations whose ids the server assigns (CreateNote,
 * CreateGroup, InstallLensPage) render under a temporary id until the
 * broadcast carries the real one.
 */

import type {
  AckMessage,
  ErrorMessage,
  JoinSnapshotMessage,
  MutationAppliedMessage,
  ServerMessage,
} from "./protocol.js";
import { submitMutationMessage, type SubmitMutationMessage } from "./protocol.js";
import { applyMutation, type MutationWire, type WorkspaceDoc } from "./state.js";
import { userColor } from "./colors.js";

/** Mutation kinds whose primary id is assigned by the server. */
const SERVER_ASSIGNED_ID_KINDS = new Set(["CreateNote", "CreateGroup", "InstallLensPage"]);

export interface PendingMutation {
  clientSeq: number;
  mutation: MutationWire;
  /** Placeholder id used for optimistic rendering of create mutations. */
  tempId: string | null;
}

export type ReplicaEvent =
  | { type: "snapshot"; revision: number }
  | { type: "applied"; revision: number; actor: string; own: boolean }
  | { type: "confirmed"; clientSeq: number; revision: number }
  | { type: "rejected"; clientSeq: number; code: string; detail: string }
  | { type: "diverged"; reason: string };

export class ClientReplica {
  readonly user: string;
  sessionId: string | null = null;
  confirmed: WorkspaceDoc | null = null;
  pending: PendingMutation[] = [];
  /** Set when the local apply disagrees with the server stream. */
  divergence: string | null = null;

  private nextSeq = 1;
  private viewCache: WorkspaceDoc | null = null;

  constructor(user: string) {
    this.user = user;
  }

  get revision(): number {
    return this.confirmed === null ? -1 : this.confirmed.revision;
  }

  /** This user's note color, as every replica will render it. */
  color(): string {
    return userColor(this.confirmed === null ? [] : this.confirmed.users, this.user);
  }

  /**
   * Build a submitMutation message for this user and track it as pending.
   * The caller is responsible for sending the returned message.
   */
  prepare(kind: string, payload: Record<string, unknown>): SubmitMutationMessage {
    const clientSeq = this.nextSeq++;
    const mutation: MutationWire = { kind, actor: this.user, payload };
    const tempId = SERVER_ASSIGNED_ID_KINDS.has(kind) ? `pending-${clientSeq}` : null;
    this.pending.push({ clientSeq, mutation, tempId });
    this.viewCache = null;
    return submitMutationMessage(clientSeq, mutation);
  }

  /** Route one server message; returns events the UI may react to. */
  handleServer(msg: ServerMessage): ReplicaEvent[] {
    switch (msg.type) {
      case "joinSnapshot":
        return this.onSnapshot(msg);
      case "mutationApplied":
        return this.onMutationApplied(msg);
      case "ack":
        return this.onAck(msg);
      case "error":
        return this.onError(msg);
      default:
        return [];
    }
  }

  private onSnapshot(msg: JoinSnapshotMessage): ReplicaEvent[] {
    if (this.sessionId !== null && msg.sessionId !== this.sessionId) {
      // a reconnect produced a new session: pending submissions of the old
      // session will never resolve, and its sequence numbering restarts
      this.pending = [];
      this.nextSeq = 1;
    }
    this.sessionId = msg.sessionId;
    this.confirmed = msg.state;
    this.divergence = null;
    this.viewCache = null;
    return [{ type: "snapshot", revision: msg.revision }];
  }

  private onMutationApplied(msg: MutationAppliedMessage): ReplicaEvent[] {
    if (this.confirmed === null) {
      return [{ type: "diverged", reason: "mutation before snapshot" }];
    }
    const expected = this.confirmed.revision + 1;
    if (msg.serverRevision !== expected) {
      this.divergence = `revision gap: expected ${expected}, got ${msg.serverRevision}`;
      return [{ type: "diverged", reason: this.divergence }];
    }
    try {
      this.confirmed = applyMutation(this.confirmed, msg.mutation).doc;
    } catch (err) {
      this.divergence = `confirmed mutation failed locally: ${String(err)}`;
      return [{ type: "diverged", reason: this.divergence }];
    }
    this.viewCache = null;
    const events: ReplicaEvent[] = [];
    const own = msg.originSession !== null && msg.originSession === this.sessionId;
    if (own && msg.clientSeq !== null && this.dropPending(msg.clientSeq)) {
      events.push({ type: "confirmed", clientSeq: msg.clientSeq, revision: msg.serverRevision });
    }
    events.push({ type: "applied", revision: msg.serverRevision, actor: msg.actor, own });
    return events;
  }

  private onAck(msg: AckMessage): ReplicaEvent[] {
    // the origin session hears its own broadcast first, so the entry is
    // normally gone already; the ack is the backstop
    if (this.dropPending(msg.clientSeq)) {
      return [{ type: "confirmed", clientSeq: msg.clientSeq, revision: msg.serverRevision }];
    }
    return [];
  }

  private onError(msg: ErrorMessage): ReplicaEvent[] {
    if (msg.clientSeq === undefined) return [];
    this.dropPending(msg.clientSeq);
    return [{ type: "rejected", clientSeq: msg.clientSeq, code: msg.code, detail: msg.detail }];
  }

  private dropPending(clientSeq: number): boolean {
    const before = this.pending.length;
    this.pending = this.pending.filter((p) => p.clientSeq !== clientSeq);
    if (this.pending.length !== before) {
      this.viewCache = null;
      return true;
    }
    return false;
  }

  /**
   * The document to render: confirmed state plus pending mutations applied
   * optimistically. Pending entries that cannot apply locally (stale
   * against newer server state, or awaiting a server-assigned id they
   * reference) are skipped rather than shown.
   */
  view(): WorkspaceDoc | null {
    if (this.confirmed === null) return null;
    if (this.pending.length === 0) return this.confirmed;
    if (this.viewCache !== null) return this.viewCache;
    let doc = this.confirmed;
    for (const entry of this.pending) {
      try {
        doc = applyMutation(doc, withTempId(entry)).doc;
      } catch {
        // the server will reject or reorder it; keep the view consistent
      }
    }
    this.viewCache = doc;
    return doc;
  }
}

/** Inject the placeholder id a create mutation renders under while pending. */
function withTempId(entry: PendingMutation): MutationWire {
  if (entry.tempId === null) return entry.mutation;
  const { kind, actor, payload } = entry.mutation;
  if (kind === "CreateNote") {
    return { kind, actor, payload: { ...payload, noteId: entry.tempId } };
  }
  if (kind === "CreateGroup") {
    return { kind, actor, payload: { ...payload, groupId: entry.tempId } };
  }
  if (kind === "InstallLensPage") {
    const lens = payload.lens;
    if (typeof lens === "object" && lens !== null && !Array.isArray(lens)) {
      return { kind, actor, payload: { ...payload, lens: { ...lens, id: entry.tempId } } };
    }
  }
  return entry.mutation;
}
