/* tslint:disable */
/* eslint-disable */

/**
 * Resonance peaks of mode l.
 */
export function eigenfrequencies(medium: string, omega_min: number, omega_max: number, d_omega: number, l: number): string;

/**
 * Noise autocorrelation spectrum of mode l, closed form and thin annulus.
 */
export function noiseCorrelation(medium: string, noise: string, omega_min: number, omega_max: number, d_omega: number, l: number): string;

/**
 * Scattering operator and reflection phase of mode l over a band.
 */
export function scatteringSpectrum(medium: string, omega_min: number, omega_max: number, d_omega: number, l: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly eigenfrequencies: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly noiseCorrelation: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number, number];
    readonly scatteringSpectrum: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
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
