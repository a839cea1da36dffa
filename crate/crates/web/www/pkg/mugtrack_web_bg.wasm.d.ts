/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demo_free: (a: number, b: number) => void;
export const demo_click: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number, number];
export const demo_collect: (a: number, b: number, c: number, d: bigint) => [number, number, number, number];
export const demo_frame_rgba: (a: number, b: number) => [number, number, number, number];
export const demo_frames: (a: number) => number;
export const demo_height: (a: number) => number;
export const demo_new: (a: bigint, b: number, c: number, d: number) => [number, number, number];
export const demo_regions: (a: number) => number;
export const demo_selection: (a: number) => [number, number];
export const demo_track_mask: (a: number, b: number, c: number) => [number, number];
export const demo_width: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
