/* tslint:disable */
/* eslint-disable */

/**
 * A synthetic clip held in memory, plus the last segmentation and
 * collection results for drawing.
 */
export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Segments frame `t` from click prompts (`labels[i]` is 1 for a
     * positive click, 0 for a negative one) and keeps the best candidate as
     * the selection. Returns the candidates as JSON, best first.
     */
    click(t: number, xs: Float64Array, ys: Float64Array, labels: Uint8Array): string;
    /**
     * Runs the collection pipeline with the oracle segmenter and exact
     * flows, applies the gamma filter and scores the kept tracks against
     * ground truth. Returns a JSON summary.
     */
    collect(gamma: number, points: number, seed: bigint): string;
    /**
     * RGBA pixels of frame `t` (1-based), ready for `ImageData`.
     */
    frame_rgba(t: number): Uint8Array;
    frames(): number;
    height(): number;
    /**
     * Generates a clip; the same arguments always give the same scene.
     */
    constructor(seed: bigint, shapes: number, frames: number, size: number);
    regions(): number;
    /**
     * The current selection as one byte per pixel (1 inside), or an empty
     * array when nothing is selected.
     */
    selection(): Uint8Array;
    /**
     * Mask of collected track `index` at frame `t`, one byte per pixel;
     * empty when the track has no mask there.
     */
    track_mask(index: number, t: number): Uint8Array;
    width(): number;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly demo_click: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number, number];
    readonly demo_collect: (a: number, b: number, c: number, d: bigint) => [number, number, number, number];
    readonly demo_frame_rgba: (a: number, b: number) => [number, number, number, number];
    readonly demo_frames: (a: number) => number;
    readonly demo_height: (a: number) => number;
    readonly demo_new: (a: bigint, b: number, c: number, d: number) => [number, number, number];
    readonly demo_regions: (a: number) => number;
    readonly demo_selection: (a: number) => [number, number];
    readonly demo_track_mask: (a: number, b: number, c: number) => [number, number];
    readonly demo_width: (a: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
