/* tslint:disable */
/* eslint-disable */

/**
 * Split what the deadline leaves after the fixed stages between uplink and downlink.
 */
export function budget(t_tot: number, t_s: number, t_p: number, t_c: number, uplink_share: number): string;

/**
 * Grade a sensor event against the user's trajectory on a local grid.
 * Positions are metres, headings are compass degrees.
 */
export function classify(ux: number, uy: number, u_bearing: number, u_speed: number, sx: number, sy: number, s_bearing: number, event: boolean, cell_size_m: number): string;

/**
 * Residual impact speed for each latency in ms.
 */
export function impact(latencies_ms: Float64Array, k: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly budget: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly classify: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number, number];
    readonly impact: (a: number, b: number, c: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
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
