/* tslint:disable */
/* eslint-disable */

/**
 * Plants three edges in a five-city panel and runs discovery on the
 * training range.
 */
export function discover(seed: number, strength: number): string;

/**
 * Trains the influence-wired model and compares its forecast for `city`
 * with the last-value and AR baselines.
 */
export function forecast_compare(seed: number, strength: number, city: number): string;

/**
 * Granger p-value at each lag 1..=8 for `source` driving `target`.
 */
export function lag_profile(seed: number, strength: number, source: number, target: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly discover: (a: number, b: number) => [number, number, number, number];
    readonly forecast_compare: (a: number, b: number, c: number) => [number, number, number, number];
    readonly lag_profile: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
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
