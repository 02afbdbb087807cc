/**
 * Tool panels around the canvas: top bar (page picker, status, snapshots),
 * goal decomposition, per-note expansion tools, group tools, lens
 * generation, discussion recording, and settings. Pure view layer — every
 * control delegates to a BoardApp method and re-renders on notification.
 */

import type { AiResultEntry, BoardApp } from "./app.js";
import { AudioCapture } from "./audio.js";
import { PAGE_MAIN, RELATION_TYPES, type WorkspaceDoc } from "./state.js";

interface IdeaCardWire {
  cardId: string;
  title: string;
  briefDetail: string;
  expanded: boolean;
}

interface IdeaHintWire {
  text: string;
  score: number;
  kind: string;
  sourceNote?: string;
  sourceGroup?: string;
}

interface KeyInfoCardWire {
  cardId: string;
  summary: string;
  relatedNote: string;
  relevance: number;
  sourceSpan: string;
}

interface RelevantCardWire {
  note: string;
  matchedSentence: string;
  relevance: number;
}

export class Panels {
  private readonly top: HTMLElement;
  private readonly side: HTMLElement;
  private readonly app: BoardApp;
  private readonly onZoom: (dir: 1 | -1) => void;
  private capture: AudioCapture | null = null;
  private showSnapshots = false;

  constructor(top: HTMLElement, side: HTMLElement, app: BoardApp, onZoom: (dir: 1 | -1) => void) {
    this.top = top;
    this.side = side;
    this.app = app;
    this.onZoom = onZoom;
  }

  render(): void {
    this.renderTop();
    this.renderSide();
  }

  // --- top bar ---------------------------------------------------------------

  private renderTop(): void {
    this.top.textContent = "";
    const doc = this.app.view();

    const brand = el("span", "brand", "Board");
    this.top.appendChild(brand);

    if (doc !== null) {
      const picker = document.createElement("select");
      picker.className = "page-picker";
      picker.appendChild(new Option("Main board", PAGE_MAIN));
      for (const lensId of Object.keys(doc.lenses).sort()) {
        picker.appendChild(new Option(`Lens: ${doc.lenses[lensId].lens.name}`, lensId));
      }
      picker.value = this.app.page;
      picker.addEventListener("change", () => this.app.switchPage(picker.value));
      this.top.appendChild(picker);
    }

    this.top.appendChild(button("−", () => this.onZoom(-1), "zoom"));
    this.top.appendChild(button("+", () => this.onZoom(1), "zoom"));
    this.top.appendChild(button("Save snapshot", () => void this.saveSnapshot()));
    this.top.appendChild(
      button("Snapshots…", () => {
        this.showSnapshots = !this.showSnapshots;
        this.render();
      }),
    );

    const status = el("span", `status status-${this.app.status}`, this.app.status);
    const pendingCount = this.app.replica.pending.length;
    if (pendingCount > 0) status.textContent += ` (${pendingCount} unconfirmed)`;
    this.top.appendChild(status);

    const who = el("span", "whoami", this.app.replica.user);
    if (doc !== null) who.textContent += ` @ ${doc.id}`;
    this.top.appendChild(who);
  }

  private async saveSnapshot(): Promise<void> {
    const name = window.prompt("Snapshot name");
    if (name === null || !name.trim()) return;
    try {
      await this.app.saveSnapshot(name.trim());
    } catch {
      if (window.confirm(`Could not save "${name.trim()}" — overwrite if it exists?`)) {
        await this.app.saveSnapshot(name.trim(), true).catch((err) => window.alert(String(err)));
      }
    }
  }

  // --- side panel -------------------------------------------------------------

  private renderSide(): void {
    this.side.textContent = "";
    const doc = this.app.view();
    if (doc === null) return;

    if (this.showSnapshots) this.side.appendChild(this.snapshotSection());
    this.side.appendChild(this.noticesSection());
    this.side.appendChild(this.goalSection());
    const noteSec = this.noteSection(doc);
    if (noteSec !== null) this.side.appendChild(noteSec);
    const groupSec = this.groupSection(doc);
    if (groupSec !== null) this.side.appendChild(groupSec);
    this.side.appendChild(this.lensSection());
    this.side.appendChild(this.recordingSection());
    this.side.appendChild(this.settingsSection(doc));
  }

  private section(title: string): HTMLElement {
    const sec = el("section", "panel");
    sec.appendChild(el("h3", "panel-title", title));
    return sec;
  }

  private latest(kind: string): AiResultEntry | undefined {
    return this.app.aiResults.find((r) => r.kind === kind);
  }

  private resultHeader(entry: AiResultEntry, label: string): HTMLElement {
    const head = el("div", "result-head", label);
    if (this.app.isStale(entry)) {
      const badge = el("span", "badge badge-stale", "stale");
      badge.title = `Computed at revision ${entry.baseRevision}; the board has moved on.`;
      head.appendChild(badge);
    }
    return head;
  }

  // --- notices -------------------------------------------------------------------

  private noticesSection(): HTMLElement {
    const sec = el("div", "notices");
    for (const notice of this.app.notices.slice(0, 3)) {
      const row = el("div", "notice", `${notice.code}: ${notice.detail}`);
      sec.appendChild(row);
    }
    return sec;
  }

  // --- goal decomposition ------------------------------------------------------

  private goalSection(): HTMLElement {
    const sec = this.section("Goal");
    const form = document.createElement("form");
    const input = document.createElement("input");
    input.placeholder = "Describe the goal to break down";
    const go = button("Break down", () => undefined);
    go.type = "submit";
    form.append(input, go);
    form.addEventListener("submit", (ev) => {
      ev.preventDefault();
      if (input.value.trim()) this.app.decomposeGoal(input.value);
    });
    sec.appendChild(form);

    const entry = this.latest("decomposeGoal") ?? this.latest("listCards");
    if (entry !== undefined && Array.isArray(entry.payload.cards)) {
      sec.appendChild(this.resultHeader(entry, "Subtasks"));
      const expandedIds = new Set(
        this.app.aiResults
          .filter((r) => r.kind === "expandSubtask")
          .map((r) => r.payload.cardId as string),
      );
      for (const card of entry.payload.cards as IdeaCardWire[]) {
        const row = el("div", "card");
        row.appendChild(el("div", "card-title", card.title));
        row.appendChild(el("div", "card-detail", card.briefDetail));
        const expanded = card.expanded || expandedIds.has(card.cardId);
        const act = button(expanded ? "On board" : "Expand to board", () =>
          this.app.expandSubtask(card.cardId),
        );
        act.disabled = expanded;
        row.appendChild(act);
        sec.appendChild(row);
      }
    }
    return sec;
  }

  // --- per-note tools --------------------------------------------------------------

  private noteSection(doc: WorkspaceDoc): HTMLElement | null {
    const noteId = this.app.selectedNoteId;
    if (noteId === null) return null;
    const note = doc.notes[noteId];
    if (note === undefined) return null;
    const sec = this.section("Selected note");
    sec.appendChild(el("div", "note-preview", note.text));

    const row = el("div", "row");
    row.appendChild(button("Delete", () => this.app.deleteNote(noteId), "danger"));
    sec.appendChild(row);

    if (!noteId.startsWith("pending-")) {
      const queryForm = document.createElement("form");
      const queryInput = document.createElement("input");
      queryInput.placeholder = "Expand with a question…";
      const ask = button("Ask", () => undefined);
      ask.type = "submit";
      queryForm.append(queryInput, ask);
      queryForm.addEventListener("submit", (ev) => {
        ev.preventDefault();
        if (queryInput.value.trim()) this.app.expandQuery(noteId, queryInput.value);
      });
      sec.appendChild(queryForm);

      const relRow = el("div", "row");
      const relPicker = document.createElement("select");
      for (const rel of RELATION_TYPES) relPicker.appendChild(new Option(rel, rel));
      relRow.appendChild(relPicker);
      relRow.appendChild(button("Explore relation", () => this.app.expandRelation(noteId, relPicker.value)));
      sec.appendChild(relRow);
    }

    const entry = this.latest("expandQuery") ?? this.latest("expandRelation");
    if (entry !== undefined && entry.payload.noteId === noteId && Array.isArray(entry.payload.hints)) {
      sec.appendChild(this.resultHeader(entry, "Suggestions"));
      for (const hint of entry.payload.hints as IdeaHintWire[]) {
        sec.appendChild(this.hintRow(hint, noteId));
      }
    }
    return sec;
  }

  private hintRow(hint: IdeaHintWire, noteId: string | null): HTMLElement {
    const row = el("div", "hint");
    const text = el("div", "hint-text", hint.text);
    text.title = `${hint.kind} · score ${hint.score.toFixed(2)}`;
    row.appendChild(text);
    const actions = el("div", "row");
    if (noteId !== null) {
      actions.appendChild(button("Apply to note", () => this.app.applySuggestion(noteId, hint.text)));
    }
    actions.appendChild(
      button("Add as note", () => this.app.addHintAsNote(hint.text, noteId ?? undefined)),
    );
    row.appendChild(actions);
    return row;
  }

  // --- group tools ----------------------------------------------------------------

  private groupSection(doc: WorkspaceDoc): HTMLElement | null {
    const groupId = this.app.selectedGroupId;
    if (groupId === null) return null;
    const group = doc.groups[groupId];
    if (group === undefined) return null;
    const sec = this.section(`Group: ${group.title || "(untitled)"}`);

    const row = el("div", "row");
    row.appendChild(
      button("Rename", () => {
        const title = window.prompt("Group title", group.title);
        if (title !== null) this.app.renameGroup(groupId, title);
      }),
    );
    row.appendChild(button("Delete", () => this.app.deleteGroup(groupId), "danger"));
    if (group.parent !== null) {
      row.appendChild(button("Promote", () => this.app.submit("PromoteSubgroup", { groupId })));
    }
    sec.appendChild(row);

    const aiRow = el("div", "row");
    aiRow.appendChild(button("Suggest dimensions", () => this.app.suggestDimensions(groupId)));
    aiRow.appendChild(button("Discussion hints", () => this.app.groupDiscussionHints(groupId)));
    sec.appendChild(aiRow);

    const dims = this.latest("suggestDimensions");
    if (dims !== undefined && dims.payload.groupId === groupId && Array.isArray(dims.payload.dimensions)) {
      sec.appendChild(this.resultHeader(dims, "Dimensions"));
      const picks: HTMLInputElement[] = [];
      for (const dim of dims.payload.dimensions as string[]) {
        const label = document.createElement("label");
        const check = document.createElement("input");
        check.type = "checkbox";
        check.value = dim;
        picks.push(check);
        label.append(check, document.createTextNode(` ${dim}`));
        sec.appendChild(label);
      }
      sec.appendChild(
        button("Split into subgroups", () => {
          const chosen = picks.filter((p) => p.checked).map((p) => p.value);
          if (chosen.length > 0) this.app.hierarchicalGroup(groupId, chosen);
        }),
      );
    }

    const hints = this.latest("groupHints");
    if (hints !== undefined && hints.payload.groupId === groupId && Array.isArray(hints.payload.hints)) {
      sec.appendChild(this.resultHeader(hints, "Discussion hints"));
      for (const hint of hints.payload.hints as IdeaHintWire[]) {
        sec.appendChild(this.hintRow(hint, null));
      }
    }
    return sec;
  }

  // --- lenses ------------------------------------------------------------------------

  private lensSection(): HTMLElement {
    const sec = this.section("Lenses");
    sec.appendChild(button("Generate lens ideas", () => this.app.generateLenses()));
    const entry = this.latest("generateLenses");
    if (entry !== undefined) {
      sec.appendChild(this.resultHeader(entry, "Candidates"));
      for (const cand of this.app.lensCandidates) {
        const row = el("div", "card");
        row.appendChild(el("div", "card-title", cand.name));
        row.appendChild(el("div", "card-detail", cand.description));
        const names = (cand.groups ?? []).map((g) => g.name).join(" · ");
        if (names) row.appendChild(el("div", "card-detail", names));
        row.appendChild(button("Install as page", () => this.app.installLens(cand.name)));
        sec.appendChild(row);
      }
    }
    return sec;
  }

  // --- discussion recording -------------------------------------------------------------

  private recordingSection(): HTMLElement {
    const sec = this.section("Discussion");
    const row = el("div", "row");
    if (this.app.recording) {
      row.appendChild(button("Stop recording", () => void this.stopCapture(), "danger"));
    } else {
      row.appendChild(button("Start recording", () => void this.startCapture()));
    }
    row.appendChild(button("Key info", () => this.app.extractKeyInfo()));
    row.appendChild(button("Relevant ideas", () => this.app.retrieveRelevant()));
    sec.appendChild(row);

    for (const [recordingId, segments] of this.app.transcripts) {
      const block = el("div", "transcript");
      block.appendChild(el("div", "transcript-title", `Transcript ${recordingId}`));
      for (const seg of segments) {
        block.appendChild(el("div", "transcript-line", seg.text));
      }
      sec.appendChild(block);
    }

    const keyInfo = this.latest("extractKeyInfo");
    if (keyInfo !== undefined && Array.isArray(keyInfo.payload.cards)) {
      sec.appendChild(this.resultHeader(keyInfo, "Key information"));
      for (const card of keyInfo.payload.cards as KeyInfoCardWire[]) {
        const row = el("div", "card card-clickable");
        row.appendChild(el("div", "card-title", card.summary));
        row.appendChild(el("div", "card-detail", `“${card.sourceSpan}”`));
        row.appendChild(el("div", "card-detail", `relates to: ${card.relatedNote}`));
        row.title = "Click to add to the board";
        row.addEventListener("click", () => this.app.cardToNote(card.cardId));
        sec.appendChild(row);
      }
    }

    const relevant = this.latest("retrieveRelevant");
    if (relevant !== undefined && Array.isArray(relevant.payload.cards)) {
      sec.appendChild(this.resultHeader(relevant, "Ideas echoed in discussion"));
      for (const card of relevant.payload.cards as RelevantCardWire[]) {
        const row = el("div", "card");
        row.appendChild(el("div", "card-title", card.note));
        row.appendChild(el("div", "card-detail", `“${card.matchedSentence}”`));
        sec.appendChild(row);
      }
    }
    return sec;
  }

  private async startCapture(): Promise<void> {
    this.app.startRecording();
    if (AudioCapture.supported()) {
      this.capture = new AudioCapture((b64) => this.app.sendAudioChunk(b64));
      try {
        await this.capture.start();
      } catch {
        this.capture = null; // recording continues server-side without audio
      }
    }
  }

  private stopCapture(): void {
    this.capture?.stop();
    this.capture = null;
    this.app.stopRecording();
  }

  // --- settings ---------------------------------------------------------------------

  private settingsSection(doc: WorkspaceDoc): HTMLElement {
    const sec = this.section("Settings");
    const s = doc.settings;

    sec.appendChild(
      this.toggle("Relation hints", s.relationHintsEnabled, (v) =>
        this.app.changeSettings({ relationHintsEnabled: v }),
      ),
    );
    sec.appendChild(
      this.toggle("Cross-user pairs only", s.crossUserOnly, (v) =>
        this.app.changeSettings({ crossUserOnly: v }),
      ),
    );
    sec.appendChild(
      this.numberField("Refresh interval (ms)", s.hintRefreshIntervalMs, 1, (v) =>
        this.app.changeSettings({ hintRefreshIntervalMs: Math.round(v) }),
      ),
    );
    sec.appendChild(
      this.numberField("Confidence threshold", s.confidenceThreshold, 0.05, (v) =>
        this.app.changeSettings({ confidenceThreshold: v }),
      ),
    );
    sec.appendChild(
      this.numberField("Max hints per refresh", s.maxHintsPerRefresh, 1, (v) =>
        this.app.changeSettings({ maxHintsPerRefresh: Math.round(v) }),
      ),
    );
    return sec;
  }

  private toggle(label: string, value: boolean, onChange: (v: boolean) => void): HTMLElement {
    const wrap = document.createElement("label");
    wrap.className = "setting";
    const check = document.createElement("input");
    check.type = "checkbox";
    check.checked = value;
    check.addEventListener("change", () => onChange(check.checked));
    wrap.append(check, document.createTextNode(` ${label}`));
    return wrap;
  }

  private numberField(
    label: string,
    value: number,
    step: number,
    onChange: (v: number) => void,
  ): HTMLElement {
    const wrap = document.createElement("label");
    wrap.className = "setting";
    const input = document.createElement("input");
    input.type = "number";
    input.step = String(step);
    input.value = String(value);
    input.addEventListener("change", () => {
      const v = Number(input.value);
      if (Number.isFinite(v)) onChange(v);
    });
    wrap.append(document.createTextNode(`${label} `), input);
    return wrap;
  }

  private snapshotSection(): HTMLElement {
    const sec = this.section("Snapshots");
    const list = el("div", "snapshot-list", "Loading…");
    sec.appendChild(list);
    void this.app
      .listSnapshots()
      .then((snaps) => {
        list.textContent = "";
        if (snaps.length === 0) list.textContent = "No snapshots saved yet.";
        for (const snap of snaps) {
          const row = el("div", "row");
          row.appendChild(el("span", "snapshot-name", snap.name));
          row.appendChild(
            button("Load", () => void this.app.loadSnapshot(snap.name).catch((e) => window.alert(String(e)))),
          );
          list.appendChild(row);
        }
      })
      .catch((err) => {
        list.textContent = `Could not list snapshots: ${String(err)}`;
      });
    return sec;
  }
}

// --- tiny DOM helpers -------------------------------------------------------------

function el(tag: string, className: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function button(label: string, onClick: () => void, className = ""): HTMLButtonElement {
  const btn = document.createElement("button");
  btn.type = "button";
  btn.textContent = label;
  if (className) btn.className = className;
  btn.addEventListener("click", (ev) => {
    ev.stopPropagation();
    onClick();
  });
  return btn;
}
