/**
 * Whiteboard canvas: renders the current page of the replica view and
 * translates pointer gestures into protocol submissions.
 *
 * The main page is a free-form surface — notes at their coordinates,
 * groups drawn as containers around their members, relation hints as
 * labeled edges. Lens pages render the lens assignment as affinity
 * buckets. Every edit goes through the BoardApp (and therefore the
 * protocol); the canvas never touches the document directly.
 */

import type { BoardApp } from "./app.js";
import { userColor } from "./colors.js";
import { PAGE_MAIN, type GroupDoc, type NoteDoc, type WorkspaceDoc } from "./state.js";

const NOTE_W = 160;
const NOTE_H = 96;
const GROUP_PAD = 18;
const GROUP_HEADER = 26;

interface Rect {
  x: number;
  y: number;
  w: number;
  h: number;
}

export class BoardCanvas {
  private readonly root: HTMLElement;
  private readonly app: BoardApp;
  private scale = 1;
  private drag: { noteId: string; dx: number; dy: number; moved: boolean } | null = null;

  constructor(root: HTMLElement, app: BoardApp) {
    this.root = root;
    this.app = app;
    this.root.classList.add("board-canvas");
    this.bindSurface();
  }

  zoomIn(): void {
    this.scale = Math.min(2, this.scale * 1.2);
    this.render();
  }

  zoomOut(): void {
    this.scale = Math.max(0.4, this.scale / 1.2);
    this.render();
  }

  render(): void {
    const doc = this.app.view();
    this.root.textContent = "";
    if (doc === null) {
      const empty = document.createElement("div");
      empty.className = "canvas-empty";
      empty.textContent = "Connecting to the workspace…";
      this.root.appendChild(empty);
      return;
    }
    const surface = document.createElement("div");
    surface.className = "board-surface";
    surface.style.transform = `scale(${this.scale})`;
    surface.dataset.page = this.app.page;
    this.root.appendChild(surface);

    if (this.app.page === PAGE_MAIN) {
      this.renderFreeform(surface, doc, PAGE_MAIN);
    } else if (this.app.page in doc.lenses) {
      this.renderLensPage(surface, doc, this.app.page);
    } else {
      this.renderFreeform(surface, doc, this.app.page);
    }
  }

  // --- free-form page (MAIN) -------------------------------------------------

  private renderFreeform(surface: HTMLElement, doc: WorkspaceDoc, page: string): void {
    const notes = Object.values(doc.notes)
      .filter((n) => n.page === page)
      .sort((a, b) => (a.id < b.id ? -1 : 1));
    const groups = Object.values(doc.groups)
      .filter((g) => g.page === page)
      .sort((a, b) => (a.id < b.id ? -1 : 1));

    const rects = new Map<string, Rect>();
    for (const g of groups) rects.set(g.id, this.groupRect(g, doc, new Set()));

    // containers first (painted under the notes), outermost first
    for (const g of groups.slice().sort((a, b) => depth(a, doc) - depth(b, doc))) {
      surface.appendChild(this.groupBox(g, rects.get(g.id)!));
    }
    this.renderEdges(surface, doc, notes);
    for (const note of notes) {
      surface.appendChild(this.noteCard(note, doc));
    }
    this.growSurface(surface, notes, rects);
  }

  private groupRect(g: GroupDoc, doc: WorkspaceDoc, seen: Set<string>): Rect {
    if (seen.has(g.id)) return { x: g.x, y: g.y, w: 200, h: 120 };
    seen.add(g.id);
    let minX = Infinity;
    let minY = Infinity;
    let maxX = -Infinity;
    let maxY = -Infinity;
    for (const noteId of g.memberNotes) {
      const note = doc.notes[noteId];
      if (note === undefined || note.page !== g.page) continue;
      minX = Math.min(minX, note.x);
      minY = Math.min(minY, note.y);
      maxX = Math.max(maxX, note.x + NOTE_W);
      maxY = Math.max(maxY, note.y + NOTE_H);
    }
    for (const child of Object.values(doc.groups)) {
      if (child.parent !== g.id) continue;
      const r = this.groupRect(child, doc, seen);
      minX = Math.min(minX, r.x);
      minY = Math.min(minY, r.y);
      maxX = Math.max(maxX, r.x + r.w);
      maxY = Math.max(maxY, r.y + r.h);
    }
    if (minX === Infinity) return { x: g.x, y: g.y, w: 200, h: 120 };
    return {
      x: minX - GROUP_PAD,
      y: minY - GROUP_PAD - GROUP_HEADER,
      w: maxX - minX + GROUP_PAD * 2,
      h: maxY - minY + GROUP_PAD * 2 + GROUP_HEADER,
    };
  }

  private groupBox(g: GroupDoc, rect: Rect): HTMLElement {
    const box = document.createElement("div");
    box.className = "group-box";
    box.dataset.groupId = g.id;
    box.style.left = `${rect.x}px`;
    box.style.top = `${rect.y}px`;
    box.style.width = `${rect.w}px`;
    box.style.height = `${rect.h}px`;
    const header = document.createElement("div");
    header.className = "group-title";
    header.textContent = g.title || "(untitled group)";
    if (g.rationale) header.title = g.rationale;
    header.addEventListener("click", (ev) => {
      ev.stopPropagation();
      this.app.selectGroup(g.id);
    });
    box.appendChild(header);
    return box;
  }

  // --- lens pages ----------------------------------------------------------------

  private renderLensPage(surface: HTMLElement, doc: WorkspaceDoc, lensId: string): void {
    const il = doc.lenses[lensId];
    surface.classList.add("lens-surface");

    const header = document.createElement("div");
    header.className = "lens-header";
    const title = document.createElement("h2");
    title.textContent = il.lens.name;
    const desc = document.createElement("p");
    desc.textContent = il.lens.description;
    header.append(title, desc);
    if (il.lens.refinementIncomplete) {
      const warn = document.createElement("span");
      warn.className = "badge badge-warn";
      warn.textContent = "names still similar";
      warn.title = "The naming refinement loop hit its pass limit before all group names were distinct.";
      header.appendChild(warn);
    }
    surface.appendChild(header);

    const row = document.createElement("div");
    row.className = "lens-buckets";
    surface.appendChild(row);

    const buckets = new Map<string, HTMLElement>();
    for (const affinity of il.lens.affinities) {
      const bucket = this.lensBucket(affinity.groupName, affinity.groupDescription);
      buckets.set(affinity.groupName, bucket);
      row.appendChild(bucket);
    }
    const ungrouped = this.lensBucket("Ungrouped", "Notes the lens could not place");
    ungrouped.classList.add("bucket-ungrouped");
    row.appendChild(ungrouped);

    const placed = new Set<string>();
    for (const noteId of Object.keys(il.page.assignment).sort()) {
      const note = doc.notes[noteId];
      if (note === undefined) continue;
      placed.add(noteId);
      const bucketName = il.page.assignment[noteId];
      const bucket = (bucketName !== null && buckets.get(bucketName)) || ungrouped;
      const card = this.noteCard(note, doc, true);
      const rationale = il.page.rationales[noteId];
      if (rationale) card.title = rationale;
      bucket.appendChild(card);
    }
    // notes created directly on this page and not yet regrouped
    for (const note of Object.values(doc.notes).sort((a, b) => (a.id < b.id ? -1 : 1))) {
      if (note.page === lensId && !placed.has(note.id)) {
        ungrouped.appendChild(this.noteCard(note, doc, true));
      }
    }
  }

  private lensBucket(name: string, description: string): HTMLElement {
    const bucket = document.createElement("div");
    bucket.className = "lens-bucket";
    const title = document.createElement("div");
    title.className = "bucket-title";
    title.textContent = name;
    if (description) title.title = description;
    bucket.appendChild(title);
    return bucket;
  }

  // --- notes ------------------------------------------------------------------------

  private noteCard(note: NoteDoc, doc: WorkspaceDoc, inBucket = false): HTMLElement {
    const card = document.createElement("div");
    card.className = "note-card";
    card.dataset.noteId = note.id;
    card.style.background = userColor(doc.users, note.author);
    if (!inBucket) {
      card.style.left = `${note.x}px`;
      card.style.top = `${note.y}px`;
      card.classList.add("note-positioned");
    }
    if (note.id.startsWith("pending-")) card.classList.add("note-pending");
    if (note.provenance !== "manual") card.dataset.provenance = note.provenance;
    if (this.app.selectedNoteId === note.id) card.classList.add("note-selected");

    const body = document.createElement("div");
    body.className = "note-text";
    body.textContent = note.text;
    card.appendChild(body);

    const byline = document.createElement("div");
    byline.className = "note-byline";
    byline.textContent = note.author;
    card.appendChild(byline);
    card.title = `${note.author} · ${note.provenance}`;

    card.addEventListener("pointerdown", (ev) => this.onNotePointerDown(ev, note, inBucket));
    card.addEventListener("dblclick", (ev) => {
      ev.stopPropagation();
      const text = window.prompt("Edit note", note.text);
      if (text !== null && text.trim() && text !== note.text) {
        this.app.editNoteText(note.id, text);
      }
    });
    return card;
  }

  // --- relation hint edges --------------------------------------------------------------

  private renderEdges(surface: HTMLElement, doc: WorkspaceDoc, notes: NoteDoc[]): void {
    if (doc.relationHints.length === 0) return;
    const byId = new Map(notes.map((n) => [n.id, n]));
    let maxX = 0;
    let maxY = 0;
    for (const n of notes) {
      maxX = Math.max(maxX, n.x + NOTE_W);
      maxY = Math.max(maxY, n.y + NOTE_H);
    }
    const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
    svg.classList.add("hint-edges");
    svg.setAttribute("width", String(maxX + 200));
    svg.setAttribute("height", String(maxY + 200));
    for (const hint of doc.relationHints) {
      const a = byId.get(hint.source);
      const b = byId.get(hint.target);
      if (a === undefined || b === undefined) continue;
      const x1 = a.x + NOTE_W / 2;
      const y1 = a.y + NOTE_H / 2;
      const x2 = b.x + NOTE_W / 2;
      const y2 = b.y + NOTE_H / 2;
      const edge = document.createElementNS("http://www.w3.org/2000/svg", "g");
      edge.classList.add("hint-edge");
      const line = document.createElementNS("http://www.w3.org/2000/svg", "line");
      line.setAttribute("x1", String(x1));
      line.setAttribute("y1", String(y1));
      line.setAttribute("x2", String(x2));
      line.setAttribute("y2", String(y2));
      const label = document.createElementNS("http://www.w3.org/2000/svg", "text");
      label.setAttribute("x", String((x1 + x2) / 2));
      label.setAttribute("y", String((y1 + y2) / 2 - 6));
      label.textContent = hint.relationType;
      const tooltip = document.createElementNS("http://www.w3.org/2000/svg", "title");
      tooltip.textContent = `${hint.relationType} (confidence ${hint.confidence.toFixed(2)})\n${hint.explanation}`;
      edge.append(tooltip, line, label);
      svg.appendChild(edge);
    }
    surface.appendChild(svg);
  }

  // --- gestures ------------------------------------------------------------------------

  private bindSurface(): void {
    this.root.addEventListener("dblclick", (ev) => {
      if ((ev.target as HTMLElement).closest(".note-card, .group-box, .lens-bucket")) return;
      const text = window.prompt("New note");
      if (text === null || !text.trim()) return;
      const point = this.toBoard(ev);
      this.app.createNote(text, point.x, point.y);
    });
    this.root.addEventListener("pointermove", (ev) => this.onPointerMove(ev));
    this.root.addEventListener("pointerup", (ev) => this.onPointerUp(ev));
    this.root.addEventListener("pointerdown", (ev) => {
      if (!(ev.target as HTMLElement).closest(".note-card, .group-box")) {
        this.app.selectNote(null);
      }
    });
  }

  private onNotePointerDown(ev: PointerEvent, note: NoteDoc, inBucket: boolean): void {
    ev.stopPropagation();
    this.app.selectNote(note.id);
    if (inBucket || note.id.startsWith("pending-")) return;
    const point = this.toBoard(ev);
    this.drag = { noteId: note.id, dx: point.x - note.x, dy: point.y - note.y, moved: false };
    this.root.setPointerCapture?.(ev.pointerId);
  }

  private onPointerMove(ev: PointerEvent): void {
    if (this.drag === null) return;
    const card = this.root.querySelector<HTMLElement>(
      `.note-card[data-note-id="${CSS.escape(this.drag.noteId)}"]`,
    );
    if (card === null) return;
    const point = this.toBoard(ev);
    this.drag.moved = true;
    card.style.left = `${point.x - this.drag.dx}px`;
    card.style.top = `${point.y - this.drag.dy}px`;
  }

  private onPointerUp(ev: PointerEvent): void {
    if (this.drag === null) return;
    const drag = this.drag;
    this.drag = null;
    if (!drag.moved) return;
    const point = this.toBoard(ev);
    const x = Math.round((point.x - drag.dx) * 100) / 100;
    const y = Math.round((point.y - drag.dy) * 100) / 100;
    this.app.moveNote(drag.noteId, x, y);
    const groupId = this.groupAt(ev);
    const doc = this.app.view();
    const note = doc?.notes[drag.noteId];
    if (note !== undefined) {
      if (groupId !== null && groupId !== note.group) {
        this.app.assignNoteToGroup(drag.noteId, groupId);
      } else if (groupId === null && note.group !== null) {
        this.app.removeNoteFromGroup(drag.noteId);
      }
    }
  }

  private groupAt(ev: PointerEvent): string | null {
    for (const el of document.elementsFromPoint(ev.clientX, ev.clientY)) {
      const box = (el as HTMLElement).closest?.(".group-box") as HTMLElement | null;
      if (box?.dataset.groupId) return box.dataset.groupId;
    }
    return null;
  }

  private toBoard(ev: MouseEvent): { x: number; y: number } {
    const rect = this.root.getBoundingClientRect();
    return {
      x: (ev.clientX - rect.left + this.root.scrollLeft) / this.scale,
      y: (ev.clientY - rect.top + this.root.scrollTop) / this.scale,
    };
  }

  private growSurface(surface: HTMLElement, notes: NoteDoc[], rects: Map<string, Rect>): void {
    let maxX = 800;
    let maxY = 600;
    for (const n of notes) {
      maxX = Math.max(maxX, n.x + NOTE_W);
      maxY = Math.max(maxY, n.y + NOTE_H);
    }
    for (const r of rects.values()) {
      maxX = Math.max(maxX, r.x + r.w);
      maxY = Math.max(maxY, r.y + r.h);
    }
    surface.style.width = `${maxX + 240}px`;
    surface.style.height = `${maxY + 240}px`;
  }
}

function depth(g: GroupDoc, doc: WorkspaceDoc): number {
  let d = 0;
  let cur: GroupDoc | undefined = g;
  const seen = new Set<string>();
  while (cur !== undefined && cur.parent !== null && !seen.has(cur.id)) {
    seen.add(cur.id);
    cur = doc.groups[cur.parent];
    d += 1;
  }
  return d;
}
