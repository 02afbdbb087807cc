/**
 * Wire protocol: JSON messages with a `type` discriminator, proto version 1.
 *
 * Mirrors the server's message catalog exactly. Client to server: join,
 * submitMutation, aiRequest, startRecording, stopRecording, audioChunk,
 * ping. Server to client: joinSnapshot, mutationApplied, ack, aiResult,
 * transcriptSegment, error, pong.
 */

import type { EventDoc, MutationWire, WorkspaceDoc } from "./state.js";

export const PROTO_VERSION = 1;

// --- client -> server ---------------------------------------------------

export interface JoinMessage {
  type: "join";
  proto: number;
  user: string;
  workspace: string | null;
}

export interface SubmitMutationMessage {
  type: "submitMutation";
  proto: number;
  clientSeq: number;
  mutation: MutationWire;
}

export interface AiRequestMessage {
  type: "aiRequest";
  proto: number;
  kind: string;
  payload: Record<string, unknown>;
  requestId?: string;
}

export interface StartRecordingMessage {
  type: "startRecording";
  proto: number;
}

export interface StopRecordingMessage {
  type: "stopRecording";
  proto: number;
}

export interface AudioChunkMessage {
  type: "audioChunk";
  proto: number;
  audio: string;
}

export interface PingMessage {
  type: "ping";
  proto: number;
}

export type ClientMessage =
  | JoinMessage
  | SubmitMutationMessage
  | AiRequestMessage
  | StartRecordingMessage
  | StopRecordingMessage
  | AudioChunkMessage
  | PingMessage;

export function joinMessage(user: string, workspace: string | null = null): JoinMessage {
  return { type: "join", proto: PROTO_VERSION, user, workspace };
}

export function submitMutationMessage(clientSeq: number, mutation: MutationWire): SubmitMutationMessage {
  return { type: "submitMutation", proto: PROTO_VERSION, clientSeq, mutation };
}

export function aiRequestMessage(
  kind: string,
  payload: Record<string, unknown>,
  requestId?: string,
): AiRequestMessage {
  const msg: AiRequestMessage = { type: "aiRequest", proto: PROTO_VERSION, kind, payload };
  if (requestId !== undefined) msg.requestId = requestId;
  return msg;
}

export function startRecordingMessage(): StartRecordingMessage {
  return { type: "startRecording", proto: PROTO_VERSION };
}

export function stopRecordingMessage(): StopRecordingMessage {
  return { type: "stopRecording", proto: PROTO_VERSION };
}

export function audioChunkMessage(audioB64: string): AudioChunkMessage {
  return { type: "audioChunk", proto: PROTO_VERSION, audio: audioB64 };
}

export function pingMessage(): PingMessage {
  return { type: "ping", proto: PROTO_VERSION };
}

// --- server -> client ---------------------------------------------------

export interface JoinSnapshotMessage {
  type: "joinSnapshot";
  proto: number;
  sessionId: string;
  revision: number;
  state: WorkspaceDoc;
}

export interface MutationAppliedMessage {
  type: "mutationApplied";
  proto: number;
  serverRevision: number;
  mutation: MutationWire;
  actor: string;
  events: EventDoc[];
  originSession: string | null;
  clientSeq: number | null;
}

export interface AckMessage {
  type: "ack";
  proto: number;
  clientSeq: number;
  serverRevision: number;
}

export interface AiResultMessage {
  type: "aiResult";
  proto: number;
  kind: string;
  payload: Record<string, unknown>;
  baseRevision: number;
  requestId: string | null;
}

export interface TranscriptSegmentMessage {
  type: "transcriptSegment";
  proto: number;
  recordingId: string;
  index: number;
  text: string;
  startMs: number;
  endMs: number;
}

export interface ErrorMessage {
  type: "error";
  proto: number;
  code: string;
  detail: string;
  clientSeq?: number;
  requestId?: string;
}

export interface PongMessage {
  type: "pong";
  proto: number;
}

export type ServerMessage =
  | JoinSnapshotMessage
  | MutationAppliedMessage
  | AckMessage
  | AiResultMessage
  | TranscriptSegmentMessage
  | ErrorMessage
  | PongMessage;

const SERVER_TYPES = new Set([
  "joinSnapshot",
  "mutationApplied",
  "ack",
  "aiResult",
  "transcriptSegment",
  "error",
  "pong",
]);

/** Parse one inbound frame; returns null for anything unrecognizable. */
export function parseServerMessage(raw: string): ServerMessage | null {
  let doc: unknown;
  try {
    doc = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof doc !== "object" || doc === null) return null;
  const msg = doc as { type?: unknown; proto?: unknown };
  if (typeof msg.type !== "string" || !SERVER_TYPES.has(msg.type)) return null;
  if (msg.proto !== PROTO_VERSION) return null;
  return doc as ServerMessage;
}
