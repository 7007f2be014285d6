/* tslint:disable */
/* eslint-disable */

export function aggregateSpectrum(spectrum: Float64Array, count: number): Float64Array;

export function endmemberSpectra(bands: number, narrow_fraction: number, seed: number): Float64Array;

export function mixSpectrum(healthy: number, affected: number, dead: number, bands: number, narrow_fraction: number, seed: number): Float64Array;

/**
 * `values` holds 3 or 4 channels per pixel, pixel-major.
 */
export function renderMapRgba(values: Float64Array, height: number, width: number): Uint8Array;

export function sceneTruthRgba(height: number, width: number, pure_fraction: number, seed: number): Uint8Array;

export function warpSpectrum(spectrum: Float64Array, alpha_min: number, alpha_max: number, sigma1: number, sigma2: number, num_knots: number, seed: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly aggregateSpectrum: (a: number, b: number, c: number) => [number, number, number, number];
    readonly endmemberSpectra: (a: number, b: number, c: number) => [number, number, number, number];
    readonly mixSpectrum: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly renderMapRgba: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly sceneTruthRgba: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly warpSpectrum: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number, number];
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
