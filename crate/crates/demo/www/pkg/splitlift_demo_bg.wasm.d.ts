/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_explorer_free: (a: number, b: number) => void;
export const explorer_fromJson: (a: number, b: number) => [number, number, number];
export const explorer_generate: (a: number, b: number, c: number, d: number, e: bigint, f: number) => [number, number, number];
export const explorer_lift: (a: number, b: number, c: number) => [number, number, number, number];
export const explorer_prop27: (a: number) => [number, number, number, number];
export const explorer_summary: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
