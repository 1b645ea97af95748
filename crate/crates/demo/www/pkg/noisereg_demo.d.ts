/* tslint:disable */
/* eslint-disable */

export class LassoResult {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly betaLasso: Float64Array;
    readonly betaNetwork: Float64Array;
    readonly linf: number;
    readonly objectiveGap: number;
}

export class RateResult {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Gap series `k` in 0..4, in the order of [`RateCurves`].
     */
    series(k: number): Float64Array;
    readonly sigmas: Float64Array;
    readonly slopes: Float64Array;
}

export class SweepResult {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly d1: Float64Array;
    readonly fullMean: Float64Array;
    readonly fullSe: Float64Array;
    readonly layerwiseMean: Float64Array;
    readonly layerwiseSe: Float64Array;
    readonly risk: Float64Array;
}

export function lassoCompare(n: number, d: number, sigma: number, restarts: number, seed: number): LassoResult;

export function rateProbe(n: number, d: number, sigma_lo: number, sigma_hi: number, points: number, seed: number): RateResult;

export function widthSweep(relu: boolean, sigma: number, n: number, d: number, d1_grid: Uint32Array, seeds: number, mc_samples: number, data_seed: number): SweepResult;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_lassoresult_free: (a: number, b: number) => void;
    readonly __wbg_rateresult_free: (a: number, b: number) => void;
    readonly __wbg_sweepresult_free: (a: number, b: number) => void;
    readonly lassoCompare: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly lassoresult_betaLasso: (a: number) => [number, number];
    readonly lassoresult_betaNetwork: (a: number) => [number, number];
    readonly lassoresult_linf: (a: number) => number;
    readonly lassoresult_objectiveGap: (a: number) => number;
    readonly rateProbe: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
    readonly rateresult_series: (a: number, b: number) => [number, number];
    readonly rateresult_sigmas: (a: number) => [number, number];
    readonly rateresult_slopes: (a: number) => [number, number];
    readonly sweepresult_d1: (a: number) => [number, number];
    readonly sweepresult_fullMean: (a: number) => [number, number];
    readonly sweepresult_fullSe: (a: number) => [number, number];
    readonly sweepresult_layerwiseMean: (a: number) => [number, number];
    readonly sweepresult_layerwiseSe: (a: number) => [number, number];
    readonly sweepresult_risk: (a: number) => [number, number];
    readonly widthSweep: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number];
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
