// Wire types mirroring the service JSON bodies.

export interface HealthzResponse {
  status: string;
  version: string;
  backend: string;
  backend_reachable: boolean;
}

export interface DirectorStyle {
  name: string;
  prompt: string;
}

export interface Framing {
  id: string;
  description: string;
  character_slots: number;
}

export interface MenuCategory {
  category: string;
  tier: number;
  weight: number;
  options: string[];
}

export interface PresetsResponse {
  backgrounds: string[];
  times: string[];
  light_types: string[];
  light_directions: string[];
  director_styles: DirectorStyle[];
  framings: Framing[];
  menus: MenuCategory[];
}

export interface ScriptCharacter {
  name: string;
  gender: string;
  age: number | null;
  description: string;
}

export interface ScriptLine {
  index: number;
  speaker: string;
  text: string;
}

export interface ScriptDoc {
  heading: string | null;
  characters: ScriptCharacter[];
  lines: ScriptLine[];
}

export interface ScriptResponse {
  script_id: string;
  script: ScriptDoc;
}

// fixed keys filter hard; variable keys only influence ranking
export interface SceneQueryBody {
  fixed?: Record<string, unknown>;
  variable?: Record<string, unknown>;
}

export interface ShotSummary {
  shot_id: string;
  image_uri: string;
  shot_scale: string;
  similarity: number;
  combined_score: number;
}

export interface GroupSummary {
  group_id: string;
  scene_key: string;
  mean_score: number;
  establishing: ShotSummary;
  frames: ShotSummary[];
}

export interface MatchResponse {
  groups: GroupSummary[];
}

export interface SettingsBody {
  selections?: Record<string, string | string[]>;
  character_overrides?: Record<string, Record<string, string | string[]>>;
}

export interface SettingsDoc {
  selections: Record<string, string[]>;
  character_overrides: Record<string, Record<string, string[]>>;
  style_text: string | null;
}

export interface SessionResponse {
  session_id: string;
}

export interface RenderReport {
  statuses: Record<string, string>;
  ok: boolean;
}

export interface PinsResponse {
  pins: Record<string, boolean>;
}

export interface RevisionView {
  revision_no: number;
  image: string;
  prompt: string;
  seed: number;
}

export interface BoardFrame {
  frame_id: string;
  line_index: number;
  speaker: string | null;
  text: string | null;
  source_shot_id: string;
  source_image_uri: string;
  pinned: boolean;
  revision_count: number;
  latest: RevisionView | null;
  original: RevisionView | null;
}

export interface Board {
  session_id: string;
  created_at: string;
  updated_at: string;
  settings: SettingsDoc;
  frames: BoardFrame[];
}

export interface ApiErrorBody {
  code: string;
  message: string;
  locus: string | null;
}
