// Board state: a pure projection of server responses plus transient busy
// flags. Pins toggle optimistically and roll back on API failure; reshot
// is never optimistic. Mutations are serialized per session.

import type { ApiSurface, ReshotBody } from "./api.js";
import type { Board, BoardFrame, RenderReport } from "./types.js";

export interface FrameCard {
  frameId: string;
  lineIndex: number;
  speaker: string | null;
  text: string | null;
  sourceImageUri: string;
  pinned: boolean;
  revisionCount: number;
  latestImage: string | null;
  originalImage: string | null;
  latestPrompt: string | null;
  latestSeed: number | null;
  busy: boolean;
}

export interface BoardView {
  sessionId: string;
  updatedAt: string;
  cards: FrameCard[];
  pinnedCount: number;
  canReshot: boolean;
}

export function projectBoard(board: Board, busy: ReadonlySet<string> = new Set()): BoardView {
  const cards = board.frames.map((frame: BoardFrame): FrameCard => ({
    frameId: frame.frame_id,
    lineIndex: frame.line_index,
    speaker: frame.speaker,
    text: frame.text,
    sourceImageUri: frame.source_image_uri,
    pinned: frame.pinned,
    revisionCount: frame.revision_count,
    latestImage: frame.latest ? frame.latest.image : null,
    originalImage: frame.original ? frame.original.image : null,
    latestPrompt: frame.latest ? frame.latest.prompt : null,
    latestSeed: frame.latest ? frame.latest.seed : null,
    busy: busy.has(frame.frame_id),
  }));
  const pinnedCount = cards.filter((c) => c.pinned).length;
  return {
    sessionId: board.session_id,
    updatedAt: board.updated_at,
    cards,
    pinnedCount,
    canReshot: pinnedCount > 0 && busy.size === 0,
  };
}

export class BoardStore {
  private board: Board | null = null;
  private busy = new Set<string>();
  private queue: Promise<unknown> = Promise.resolve();
  private listeners = new Set<() => void>();

  constructor(
    private readonly api: ApiSurface,
    readonly sessionId: string,
  ) {}

  subscribe(listener: () => void): () => void {
    this.listeners.add(listener);
    return () => this.listeners.delete(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) {
      listener();
    }
  }

  view(): BoardView | null {
    return this.board ? projectBoard(this.board, this.busy) : null;
  }

  // One mutation in flight per session; later calls wait for earlier ones.
  private run<T>(task: () => Promise<T>): Promise<T> {
    const result = this.queue.then(task, task);
    this.queue = result.then(
      () => undefined,
      () => undefined,
    );
    return result;
  }

  async refresh(): Promise<void> {
    this.board = await this.api.board(this.sessionId);
    this.emit();
  }

  togglePin(frameId: string): Promise<void> {
    return this.run(async () => {
      const board = this.board;
      if (!board) {
        throw new Error("board not loaded");
      }
      const frame = board.frames.find((f) => f.frame_id === frameId);
      if (!frame) {
        throw new Error(`unknown frame ${frameId}`);
      }
      const want = !frame.pinned;
      frame.pinned = want;
      this.emit();
      let pins: Record<string, boolean>;
      try {
        pins = (await this.api.setPins(this.sessionId, [frameId], want)).pins;
      } catch (err) {
        frame.pinned = !want;
        this.emit();
        throw err;
      }
      for (const f of board.frames) {
        if (f.frame_id in pins) {
          f.pinned = pins[f.frame_id];
        }
      }
      this.emit();
    });
  }

  renderAll(userPrompt?: string, force = false): Promise<RenderReport> {
    return this.run(async () => {
      const ids = this.board ? this.board.frames.map((f) => f.frame_id) : [];
      for (const id of ids) {
        this.busy.add(id);
      }
      this.emit();
      try {
        const report = await this.api.render(this.sessionId, userPrompt, force);
        this.board = await this.api.board(this.sessionId);
        return report;
      } finally {
        for (const id of ids) {
          this.busy.delete(id);
        }
        this.emit();
      }
    });
  }

  reshot(body: ReshotBody): Promise<RenderReport> {
    return this.run(async () => {
      const pinned = this.board
        ? this.board.frames.filter((f) => f.pinned).map((f) => f.frame_id)
        : [];
      for (const id of pinned) {
        this.busy.add(id);
      }
      this.emit();
      try {
        const report = await this.api.reshot(this.sessionId, body);
        this.board = await this.api.board(this.sessionId);
        return report;
      } finally {
        for (const id of pinned) {
          this.busy.delete(id);
        }
        this.emit();
      }
    });
  }
}
