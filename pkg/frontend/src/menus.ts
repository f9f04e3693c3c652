// Two-tier menu model built from GET /presets, so preset edits never
// require a UI rebuild. Director style picks are single-select; every
// other category accumulates tokens.

import type { MenuCategory, PresetsResponse, SettingsBody } from "./types.js";

export interface TieredMenus {
  tier1: MenuCategory[];
  tier2: MenuCategory[];
}

export function menusByTier(presets: PresetsResponse): TieredMenus {
  return {
    tier1: presets.menus.filter((m) => m.tier === 1),
    tier2: presets.menus.filter((m) => m.tier === 2),
  };
}

const SINGLE_SELECT = new Set(["director_style"]);

export class MenuState {
  private selections = new Map<string, Set<string>>();

  toggle(category: string, token: string): boolean {
    if (SINGLE_SELECT.has(category)) {
      const current = this.selections.get(category);
      if (current && current.has(token)) {
        this.selections.delete(category);
        return false;
      }
      this.selections.set(category, new Set([token]));
      return true;
    }
    let tokens = this.selections.get(category);
    if (!tokens) {
      tokens = new Set();
      this.selections.set(category, tokens);
    }
    if (tokens.has(token)) {
      tokens.delete(token);
      if (tokens.size === 0) {
        this.selections.delete(category);
      }
      return false;
    }
    tokens.add(token);
    return true;
  }

  isSelected(category: string, token: string): boolean {
    const tokens = this.selections.get(category);
    return tokens ? tokens.has(token) : false;
  }

  selected(category: string): string[] {
    const tokens = this.selections.get(category);
    return tokens ? [...tokens] : [];
  }

  clear(): void {
    this.selections.clear();
  }

  toSettings(): SettingsBody {
    const selections: Record<string, string[]> = {};
    for (const [category, tokens] of this.selections) {
      if (tokens.size > 0) {
        selections[category] = [...tokens];
      }
    }
    return { selections };
  }
}
