/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_lassoresult_free: (a: number, b: number) => void;
export const __wbg_rateresult_free: (a: number, b: number) => void;
export const __wbg_sweepresult_free: (a: number, b: number) => void;
export const lassoCompare: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const lassoresult_betaLasso: (a: number) => [number, number];
export const lassoresult_betaNetwork: (a: number) => [number, number];
export const lassoresult_linf: (a: number) => number;
export const lassoresult_objectiveGap: (a: number) => number;
export const rateProbe: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
export const rateresult_series: (a: number, b: number) => [number, number];
export const rateresult_sigmas: (a: number) => [number, number];
export const rateresult_slopes: (a: number) => [number, number];
export const sweepresult_d1: (a: number) => [number, number];
export const sweepresult_fullMean: (a: number) => [number, number];
export const sweepresult_fullSe: (a: number) => [number, number];
export const sweepresult_layerwiseMean: (a: number) => [number, number];
export const sweepresult_layerwiseSe: (a: number) => [number, number];
export const sweepresult_risk: (a: number) => [number, number];
export const widthSweep: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_start: () => void;
