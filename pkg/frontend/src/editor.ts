/**
 * Editing session state machine for the mask studio.
 *
 * Owns the working mask layer, the brush, region toggles and a bounded undo
 * stack. All server traffic goes through a StudioApi, and the only mutating
 * calls are the documented ones: create/extract, PUT mask, and apply.
 */

import { regionLayerBytes, type StudioApi } from "./client.js";
import type { BrushSettings } from "./brush.js";
import { stampBrush, strokeBrush } from "./brush.js";
import {
  combineMasks,
  eraseSelection,
  MaskLayer,
  selectionPixels,
  type CombineEntry,
  type RegionName,
  type RegionSelection,
} from "./mask.js";
import type { SessionState } from "./types.js";

export interface SavedMask {
  version: number;
  bytes: Uint8Array;
}

export interface AppliedResult {
  version: number;
  bytes: Uint8Array;
  bypass: boolean;
}

export interface ReferenceEntry {
  mask: MaskLayer;
  regions: readonly string[];
}

export class MaskEditor {
  public brush: BrushSettings = { radius: 8, hardness: 0.7, intensity: 1.0, mode: "add" };
  public overlayOpacity = 0.5;
  /** When non-empty, painting is clipped to these regions. */
  public activeRegions: Set<RegionName> = new Set();

  private client: StudioApi;
  private undoLimit: number;
  private session: SessionState | null = null;
  private canvas: MaskLayer | null = null;
  private regionMap: Record<string, MaskLayer> | null = null;
  private references: Map<string, ReferenceEntry> = new Map();
  private undoStack: Float32Array[] = [];

  constructor(client: StudioApi, undoLimit = 32) {
    if (undoLimit < 1) throw new Error("undo limit must be at least 1");
    this.client = client;
    this.undoLimit = undoLimit;
  }

  public get sessionId(): string {
    if (this.session === null) throw new Error("no session open");
    return this.session.id;
  }

  public get mask(): MaskLayer {
    if (this.canvas === null) throw new Error("no session open");
    return this.canvas;
  }

  public get undoDepth(): number {
    return this.undoStack.length;
  }

  /** Attach to a session and load its latest mask, or start from zeros. */
  public async open(sessionId: string): Promise<SessionState> {
    const state = await this.client.getSession(sessionId);
    this.session = state;
    this.undoStack = [];
    this.references = new Map();
    this.regionMap = null;
    if (state.masks.length > 0) {
      const bytes = await this.client.getMask(sessionId);
      this.canvas = MaskLayer.fromPngBytes(bytes);
    } else {
      this.canvas = MaskLayer.zeros(state.width, state.height);
    }
    return state;
  }

  /** Fetch the facial region layers used for toggles and erase. */
  public async loadRegions(): Promise<Record<string, MaskLayer>> {
    const res = await this.client.getRegions(this.sessionId);
    const decoded: Record<string, MaskLayer> = {};
    for (const [name, bytes] of Object.entries(regionLayerBytes(res.layers))) {
      decoded[name] = MaskLayer.fromPngBytes(bytes);
    }
    this.regionMap = decoded;
    return decoded;
  }

  private async regions(): Promise<Record<string, MaskLayer>> {
    if (this.regionMap === null) {
      await this.loadRegions();
    }
    return this.regionMap as Record<string, MaskLayer>;
  }

  /** Run the server-side extractor and load the produced mask. */
  public async extract(method?: string, params?: Record<string, unknown>): Promise<void> {
    const res = await this.client.extract(this.sessionId, method, params);
    const bytes = await this.client.getMask(this.sessionId, res.mask_version);
    this.pushUndo();
    this.canvas = MaskLayer.fromPngBytes(bytes);
  }

  private pushUndo(): void {
    if (this.canvas === null) return;
    this.undoStack.push(this.canvas.data.slice());
    while (this.undoStack.length > this.undoLimit) {
      this.undoStack.shift();
    }
  }

  /** Revert the last editing operation. Returns false when nothing is left. */
  public undo(): boolean {
    const prev = this.undoStack.pop();
    if (prev === undefined || this.canvas === null) return false;
    this.canvas = new MaskLayer(this.canvas.width, this.canvas.height, prev);
    return true;
  }

  private restriction(): Uint8Array | undefined {
    if (this.activeRegions.size === 0) return undefined;
    if (this.regionMap === null) {
      throw new Error("region layers not loaded; call loadRegions first");
    }
    return selectionPixels({ regions: [...this.activeRegions] }, this.regionMap);
  }

  /** One brush dab. Counts as a single undoable operation. */
  public stamp(x: number, y: number): void {
    this.pushUndo();
    stampBrush(this.mask, x, y, this.brush, this.restriction());
  }

  /** One brush stroke along a segment. Counts as a single undoable operation. */
  public stroke(x0: number, y0: number, x1: number, y1: number): void {
    this.pushUndo();
    strokeBrush(this.mask, x0, y0, x1, y1, this.brush, this.restriction());
  }

  /** Zero the mask over the named facial regions. */
  public async eraseRegions(...names: RegionName[]): Promise<void> {
    const regionMap = await this.regions();
    this.pushUndo();
    this.canvas = eraseSelection(this.mask, { regions: names }, regionMap);
  }

  /** Clear the whole mask. */
  public eraseAll(): void {
    this.pushUndo();
    this.canvas = MaskLayer.zeros(this.mask.width, this.mask.height);
  }

  /** Store a per-reference mask layer for later combination. */
  public addReference(name: string, mask: MaskLayer, regions: readonly string[]): void {
    this.references.set(name, { mask, regions });
  }

  public get referenceNames(): string[] {
    return [...this.references.keys()];
  }

  /** Replace the canvas with the combination of the stored reference layers. */
  public async combineReferences(freehand?: Uint8Array): Promise<void> {
    if (this.references.size === 0) {
      throw new Error("no reference layers to combine");
    }
    const regionMap = await this.regions();
    const entries: CombineEntry[] = [];
    for (const entry of this.references.values()) {
      const selection: RegionSelection = { regions: entry.regions, freehand };
      entries.push({ mask: entry.mask, selection, regionMap });
    }
    this.pushUndo();
    this.canvas = combineMasks(entries);
  }

  /**
   * RGBA tint of the current mask for display on top of the target photo:
   * red, with alpha proportional to mask value and the overlay opacity.
   */
  public overlayPreview(): Uint8Array {
    const m = this.mask;
    const out = new Uint8Array(m.width * m.height * 4);
    for (let i = 0; i < m.data.length; i++) {
      out[i * 4] = 255;
      out[i * 4 + 3] = Math.round(m.data[i] * this.overlayOpacity * 255);
    }
    return out;
  }

  /** Quantize the canvas, upload it, and return the exact bytes sent. */
  public async save(): Promise<SavedMask> {
    const bytes = this.mask.toPngBytes();
    const res = await this.client.putMask(this.sessionId, bytes);
    // the canvas keeps quantized values so the editor matches the server
    this.canvas = MaskLayer.fromPngBytes(bytes);
    return { version: res.mask_version, bytes };
  }

  /** Run the transfer on the server and fetch the resulting image. */
  public async apply(bypass = true): Promise<AppliedResult> {
    const res = await this.client.apply(this.sessionId, bypass);
    const bytes = await this.client.getResult(this.sessionId, res.result_version);
    return { version: res.result_version, bytes, bypass: res.bypass };
  }
}
