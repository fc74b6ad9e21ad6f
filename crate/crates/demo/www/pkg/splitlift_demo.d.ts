/* tslint:disable */
/* eslint-disable */

export class Explorer {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Scenario from its JSON file format.
     */
    static fromJson(text: string): Explorer;
    /**
     * Seeded random scenario; `free` draws the conditional measures at null
     * y freely.
     */
    static generate(nx: number, ny: number, null_x: number, null_y: number, seed: bigint, free: boolean): Explorer;
    lift(cells: Uint32Array): string;
    prop27(): string;
    summary(): string;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_explorer_free: (a: number, b: number) => void;
    readonly explorer_fromJson: (a: number, b: number) => [number, number, number];
    readonly explorer_generate: (a: number, b: number, c: number, d: number, e: bigint, f: number) => [number, number, number];
    readonly explorer_lift: (a: number, b: number, c: number) => [number, number, number, number];
    readonly explorer_prop27: (a: number) => [number, number, number, number];
    readonly explorer_summary: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
