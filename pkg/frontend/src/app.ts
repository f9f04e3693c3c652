// DOM application: script editor, match gallery, two-tier menus, preview
// board with pin and reshot. All state is a projection of server
// responses; reloading a #session=<id> URL rebuilds the same board from
// GET /sessions/{id}/board.

import { ApiError, type ApiSurface } from "./api.js";
import { BoardStore, type BoardView } from "./board.js";
import { MenuState, menusByTier } from "./menus.js";
import type { GroupSummary, PresetsResponse } from "./types.js";

// Counts in-flight handlers so tests can await quiescence.
class Tracker {
  private count = 0;
  private waiters: Array<() => void> = [];

  wrap<T>(promise: Promise<T>): Promise<T> {
    this.count += 1;
    const done = () => {
      this.count -= 1;
      if (this.count === 0) {
        for (const waiter of this.waiters.splice(0)) {
          waiter();
        }
      }
    };
    promise.then(done, done);
    return promise;
  }

  idle(): Promise<void> {
    if (this.count === 0) {
      return Promise.resolve();
    }
    return new Promise((resolve) => this.waiters.push(resolve));
  }
}

export interface AppLocation {
  hash: string;
}

export interface App {
  idle(): Promise<void>;
  store(): BoardStore | null;
  scriptId(): string | null;
  openSession(sessionId: string): Promise<void>;
}

const SKELETON = `
<div class="previz-app">
  <section id="script-section">
    <h2>Script</h2>
    <textarea id="script-text" rows="12" spellcheck="false"></textarea>
    <button id="script-submit">Parse script</button>
    <div id="script-error" class="error" hidden></div>
    <div id="script-meta" class="meta" hidden></div>
  </section>
  <section id="query-section">
    <h2>Match</h2>
    <label>location <input id="query-location" placeholder="beach"></label>
    <label>time <select id="query-time"><option value=""></option></select></label>
    <label>k <input id="k-input" type="number" value="3" min="1"></label>
    <button id="match-btn" disabled>Find shot groups</button>
    <div id="match-error" class="error" hidden></div>
    <div id="gallery"></div>
  </section>
  <section id="menus-section">
    <h2>Settings</h2>
    <div id="menus"></div>
  </section>
  <section id="params-section">
    <h2>Parameters</h2>
    <label>seed <input id="seed-input" type="number" placeholder="random"></label>
    <label><input id="seed-lock" type="checkbox"> lock seeds on reshot</label>
    <label>prompt <input id="user-prompt" placeholder="extra prompt text"></label>
    <span id="alpha-beta" class="muted">ranking weights alpha and beta: server configured</span>
  </section>
  <section id="board-section" hidden>
    <h2>Board <span id="board-session" class="muted"></span></h2>
    <button id="reshot-btn" disabled>Reshot pinned</button>
    <div id="board-error" class="error" hidden></div>
    <div id="board"></div>
  </section>
</div>
`;

function describeError(err: unknown): string {
  if (err instanceof ApiError) {
    const locus = err.locus ? ` [${err.locus}]` : "";
    return `${err.code}: ${err.message}${locus}`;
  }
  return String(err);
}

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function createApp(
  root: HTMLElement,
  api: ApiSurface,
  location: AppLocation = { hash: "" },
): App {
  root.innerHTML = SKELETON;
  const tracker = new Tracker();
  const menuState = new MenuState();

  const el = <T extends HTMLElement>(selector: string): T => {
    const found = root.querySelector<T>(selector);
    if (!found) {
      throw new Error(`missing element ${selector}`);
    }
    return found;
  };

  const scriptText = el<HTMLTextAreaElement>("#script-text");
  const scriptSubmit = el<HTMLButtonElement>("#script-submit");
  const scriptError = el<HTMLDivElement>("#script-error");
  const scriptMeta = el<HTMLDivElement>("#script-meta");
  const queryLocation = el<HTMLInputElement>("#query-location");
  const queryTime = el<HTMLSelectElement>("#query-time");
  const kInput = el<HTMLInputElement>("#k-input");
  const matchBtn = el<HTMLButtonElement>("#match-btn");
  const matchError = el<HTMLDivElement>("#match-error");
  const gallery = el<HTMLDivElement>("#gallery");
  const menusHost = el<HTMLDivElement>("#menus");
  const seedInput = el<HTMLInputElement>("#seed-input");
  const seedLock = el<HTMLInputElement>("#seed-lock");
  const userPrompt = el<HTMLInputElement>("#user-prompt");
  const boardSection = el<HTMLElement>("#board-section");
  const boardSessionLabel = el<HTMLSpanElement>("#board-session");
  const reshotBtn = el<HTMLButtonElement>("#reshot-btn");
  const boardError = el<HTMLDivElement>("#board-error");
  const boardHost = el<HTMLDivElement>("#board");

  let presets: PresetsResponse | null = null;
  let currentScriptId: string | null = null;
  let store: BoardStore | null = null;
  let unsubscribe: (() => void) | null = null;

  const showError = (target: HTMLDivElement, err: unknown) => {
    target.textContent = describeError(err);
    target.hidden = false;
  };
  const clearError = (target: HTMLDivElement) => {
    target.textContent = "";
    target.hidden = true;
  };

  function renderMenus(): void {
    if (!presets) {
      return;
    }
    const tiers = menusByTier(presets);
    const section = (title: string, menus: typeof tiers.tier1) => {
      const blocks = menus
        .map((menu) => {
          const options = menu.options
            .map((token) => {
              const selected = menuState.isSelected(menu.category, token);
              const classes = ["menu-option"];
              if (menu.category === "director_style") {
                classes.push("style-btn");
              }
              if (selected) {
                classes.push("selected");
              }
              return `<button class="${classes.join(" ")}" data-category="${escapeHtml(menu.category)}" data-token="${escapeHtml(token)}">${escapeHtml(token)}</button>`;
            })
            .join("");
          return `<div class="menu-category" data-category="${escapeHtml(menu.category)}">
            <h4>${escapeHtml(menu.category)} <span class="muted">w ${menu.weight.toFixed(2)}</span></h4>
            <div class="options">${options}</div>
          </div>`;
        })
        .join("");
      return `<div class="menu-tier"><h3>${title}</h3>${blocks}</div>`;
    };
    menusHost.innerHTML = section("Tier 1", tiers.tier1) + section("Tier 2", tiers.tier2);
  }

  function renderGallery(groups: GroupSummary[]): void {
    if (groups.length === 0) {
      gallery.innerHTML = `<p class="no-results">no scene matched; relax the query and retry</p>`;
      return;
    }
    gallery.innerHTML = groups
      .map(
        (group) => `
        <button class="group-card" data-group-id="${escapeHtml(group.group_id)}">
          <span class="scene-key">${escapeHtml(group.scene_key)}</span>
          <span class="mean-score">${group.mean_score.toFixed(3)}</span>
          <span class="frame-count">${group.frames.length + 1} frames</span>
          <span class="establishing-uri">${escapeHtml(group.establishing.image_uri)}</span>
        </button>`,
      )
      .join("");
  }

  function renderBoard(view: BoardView | null): void {
    if (!view) {
      boardSection.hidden = true;
      boardHost.innerHTML = "";
      return;
    }
    boardSection.hidden = false;
    boardSessionLabel.textContent = view.sessionId;
    reshotBtn.disabled = !view.canReshot;
    boardHost.innerHTML = view.cards
      .map((card) => {
        const img = (digest: string | null, role: string) =>
          digest
            ? `<img class="${role}" data-digest="${escapeHtml(digest)}" src="${escapeHtml(api.imageUrl(digest))}" alt="${role}">`
            : `<span class="${role} empty">not rendered</span>`;
        const speaker = card.speaker ? escapeHtml(card.speaker) : "establishing";
        const text = card.text ? escapeHtml(card.text) : escapeHtml(card.sourceImageUri);
        return `
        <article class="frame-card${card.busy ? " busy" : ""}" data-frame-id="${escapeHtml(card.frameId)}"
                 data-pinned="${card.pinned}" data-revision-count="${card.revisionCount}">
          <header><span class="speaker">${speaker}</span>
            <span class="revision-count">rev ${card.revisionCount}</span></header>
          <p class="line-text">${text}</p>
          <div class="images">${img(card.latestImage, "latest")}${img(card.originalImage, "original")}</div>
          <label class="pin"><input type="checkbox" class="pin-toggle" ${card.pinned ? "checked" : ""} ${card.busy ? "disabled" : ""}> pin</label>
        </article>`;
      })
      .join("");
  }

  async function loadPresets(): Promise<void> {
    presets = await api.presets();
    queryTime.innerHTML =
      `<option value=""></option>` +
      presets.times
        .map((t) => `<option value="${escapeHtml(t)}">${escapeHtml(t)}</option>`)
        .join("");
    renderMenus();
  }

  async function openSession(sessionId: string): Promise<void> {
    if (unsubscribe) {
      unsubscribe();
    }
    store = new BoardStore(api, sessionId);
    unsubscribe = store.subscribe(() => renderBoard(store ? store.view() : null));
    clearError(boardError);
    await store.refresh();
  }

  scriptSubmit.addEventListener("click", () => {
    void tracker.wrap(
      (async () => {
        clearError(scriptError);
        scriptMeta.hidden = true;
        try {
          const response = await api.submitScript(scriptText.value);
          currentScriptId = response.script_id;
          matchBtn.disabled = false;
          const cast = response.script.characters.length;
          const lines = response.script.lines.length;
          scriptMeta.textContent = `${response.script_id}: ${cast} characters, ${lines} lines`;
          scriptMeta.hidden = false;
          gallery.innerHTML = "";
        } catch (err) {
          currentScriptId = null;
          matchBtn.disabled = true;
          let detail = describeError(err);
          if (err instanceof ApiError && err.locus) {
            const lineMatch = /^line (\d+)$/.exec(err.locus);
            if (lineMatch) {
              const lineNo = Number(lineMatch[1]);
              const offending = scriptText.value.split("\n")[lineNo - 1];
              if (offending !== undefined) {
                detail += ` -> ${offending.trim()}`;
              }
            }
          }
          scriptError.textContent = detail;
          scriptError.hidden = false;
        }
      })(),
    );
  });

  matchBtn.addEventListener("click", () => {
    void tracker.wrap(
      (async () => {
        if (!currentScriptId) {
          return;
        }
        clearError(matchError);
        const fixed: Record<string, unknown> = {};
        if (queryLocation.value.trim()) {
          fixed.location_tag = queryLocation.value.trim();
        }
        if (queryTime.value) {
          fixed.time_of_day = queryTime.value;
        }
        const k = Number(kInput.value) || 3;
        try {
          const response = await api.match(currentScriptId, { fixed }, k);
          renderGallery(response.groups);
        } catch (err) {
          showError(matchError, err);
        }
      })(),
    );
  });

  gallery.addEventListener("click", (event) => {
    const card = (event.target as HTMLElement).closest<HTMLElement>(".group-card");
    if (!card || !currentScriptId) {
      return;
    }
    const groupId = card.dataset.groupId;
    if (!groupId) {
      return;
    }
    const scriptId = currentScriptId;
    void tracker.wrap(
      (async () => {
        clearError(matchError);
        try {
          const seed = seedInput.value === "" ? undefined : Number(seedInput.value);
          const created = await api.createSession(
            scriptId,
            groupId,
            menuState.toSettings(),
            seed,
          );
          await openSession(created.session_id);
          if (store) {
            await store.renderAll(userPrompt.value || undefined);
          }
        } catch (err) {
          showError(matchError, err);
        }
      })(),
    );
  });

  menusHost.addEventListener("click", (event) => {
    const button = (event.target as HTMLElement).closest<HTMLElement>(".menu-option");
    if (!button) {
      return;
    }
    const { category, token } = button.dataset;
    if (!category || !token) {
      return;
    }
    menuState.toggle(category, token);
    renderMenus();
  });

  boardHost.addEventListener("change", (event) => {
    const toggle = event.target as HTMLElement;
    if (!toggle.classList.contains("pin-toggle")) {
      return;
    }
    const card = toggle.closest<HTMLElement>(".frame-card");
    const frameId = card ? card.dataset.frameId : undefined;
    if (!frameId || !store) {
      return;
    }
    const active = store;
    void tracker.wrap(
      (async () => {
        clearError(boardError);
        try {
          await active.togglePin(frameId);
        } catch (err) {
          showError(boardError, err);
        }
      })(),
    );
  });

  reshotBtn.addEventListener("click", () => {
    if (!store) {
      return;
    }
    const active = store;
    void tracker.wrap(
      (async () => {
        clearError(boardError);
        try {
          await active.reshot({
            settings: menuState.toSettings(),
            user_prompt: userPrompt.value || undefined,
            seed_lock: seedLock.checked,
          });
        } catch (err) {
          showError(boardError, err);
        }
      })(),
    );
  });

  void tracker.wrap(loadPresets().catch((err) => showError(matchError, err)));

  const sessionMatch = /^#session=(.+)$/.exec(location.hash);
  if (sessionMatch) {
    void tracker.wrap(
      openSession(decodeURIComponent(sessionMatch[1])).catch((err) =>
        showError(boardError, err),
      ),
    );
  }

  return {
    idle: () => tracker.idle(),
    store: () => store,
    scriptId: () => currentScriptId,
    openSession: (sessionId: string) =>
      tracker.wrap(openSession(sessionId)),
  };
}
