/* tslint:disable */
/* eslint-disable */

/**
 * One synthetic QC case: correct and wrong tracing over a rendered volume.
 */
export class Case {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Points of both tracings and the POI pairs at `threshold`, as JSON.
     */
    label(threshold: number): string;
    /**
     * `kind` is one of "truncate", "graft" or "leak".
     */
    constructor(seed: number, kind: string);
    patchSlice(wrong: boolean, point_id: number, z: number): Float32Array;
}

export function explore(n: number, separation: number, spread: number, threshold: number, seed: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_case_free: (a: number, b: number) => void;
    readonly case_label: (a: number, b: number) => [number, number, number, number];
    readonly case_new: (a: number, b: number, c: number) => [number, number, number];
    readonly case_patchSlice: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly explore: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
