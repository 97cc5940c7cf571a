/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_convergence_free: (a: number, b: number) => void;
export const __wbg_field_free: (a: number, b: number) => void;
export const __wbg_sparsity_free: (a: number, b: number) => void;
export const convergenceCurve: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
export const convergence_errors: (a: number) => [number, number];
export const convergence_n_points: (a: number) => [number, number];
export const convergence_rates: (a: number) => [number, number];
export const convergence_resolution: (a: number) => [number, number];
export const field_error: (a: number) => number;
export const field_exact: (a: number) => [number, number];
export const field_iterations: (a: number) => number;
export const field_u: (a: number) => [number, number];
export const field_x: (a: number) => [number, number];
export const field_y: (a: number) => [number, number];
export const solutionField: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
export const sparsityPattern: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const sparsity_cols: (a: number) => [number, number];
export const sparsity_magnitudes: (a: number) => [number, number];
export const sparsity_nnz: (a: number) => number;
export const sparsity_rows: (a: number) => [number, number];
export const sparsity_size: (a: number) => number;
export const __externref_table_alloc: () => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
