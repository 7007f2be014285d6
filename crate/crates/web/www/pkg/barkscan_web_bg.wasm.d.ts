/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const aggregateSpectrum: (a: number, b: number, c: number) => [number, number, number, number];
export const endmemberSpectra: (a: number, b: number, c: number) => [number, number, number, number];
export const mixSpectrum: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const renderMapRgba: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const sceneTruthRgba: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const warpSpectrum: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
