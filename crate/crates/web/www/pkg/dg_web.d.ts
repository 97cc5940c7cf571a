/* tslint:disable */
/* eslint-disable */

export class Convergence {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    errors(): Float64Array;
    n_points(): Uint32Array;
    /**
     * Rates between adjacent levels, one fewer than the levels.
     */
    rates(): Float64Array;
    /**
     * Element size in h mode, polynomial degree in p mode.
     */
    resolution(): Float64Array;
}

export class Field {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    exact(): Float64Array;
    /**
     * First solution component at each collocation point.
     */
    u(): Float64Array;
    x(): Float64Array;
    y(): Float64Array;
    readonly error: number;
    readonly iterations: number;
}

export class Sparsity {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    cols(): Uint32Array;
    /**
     * `|A_ij| / max |A|` of each entry.
     */
    magnitudes(): Float64Array;
    /**
     * 0-based row indices of the nonzero entries.
     */
    rows(): Uint32Array;
    readonly nnz: number;
    readonly size: number;
}

export function convergenceCurve(system: string, mode: string, degree: number, levels: number): Convergence;

export function solutionField(system: string, levels: number, degree: number, strong_weak: boolean, penalty: number): Field;

export function sparsityPattern(system: string, levels: number, degree: number, with_auxiliary: boolean): Sparsity;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_convergence_free: (a: number, b: number) => void;
    readonly __wbg_field_free: (a: number, b: number) => void;
    readonly __wbg_sparsity_free: (a: number, b: number) => void;
    readonly convergenceCurve: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
    readonly convergence_errors: (a: number) => [number, number];
    readonly convergence_n_points: (a: number) => [number, number];
    readonly convergence_rates: (a: number) => [number, number];
    readonly convergence_resolution: (a: number) => [number, number];
    readonly field_error: (a: number) => number;
    readonly field_exact: (a: number) => [number, number];
    readonly field_iterations: (a: number) => number;
    readonly field_u: (a: number) => [number, number];
    readonly field_x: (a: number) => [number, number];
    readonly field_y: (a: number) => [number, number];
    readonly solutionField: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
    readonly sparsityPattern: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly sparsity_cols: (a: number) => [number, number];
    readonly sparsity_magnitudes: (a: number) => [number, number];
    readonly sparsity_nnz: (a: number) => number;
    readonly sparsity_rows: (a: number) => [number, number];
    readonly sparsity_size: (a: number) => number;
    readonly __externref_table_alloc: () => number;
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
