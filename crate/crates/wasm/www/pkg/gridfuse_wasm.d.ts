/* tslint:disable */
/* eslint-disable */

/**
 * A planned corridor flight.
 */
export class Plan {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    length(): number;
    /**
     * `x, y, z_top` per pylon.
     */
    pylons(): Float64Array;
    /**
     * `x, y, z, speed, pass` per waypoint; pass is 0 forward, 1 turn, 2 backward.
     */
    waypoints(): Float64Array;
}

/**
 * Depth map and per-point visibility for a block standing on flat ground,
 * seen by one camera tilted `tilt_deg` away from nadir.
 */
export class VisibilityScene {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Row-major depth in metres; empty cells are `+inf`.
     */
    depth(): Float32Array;
    height(): number;
    point_count(): number;
    /**
     * `u, v, visible` triples for every in-frame point (`visible` is 0 or 1).
     */
    points(): Float64Array;
    visible_count(): number;
    width(): number;
}

/**
 * Pixel coordinates of `2 * lines` distorted grid lines, `SAMPLES` points
 * each, flattened as `u, v` pairs. Vertical lines come first.
 */
export function distortion_grid(width: number, height: number, f: number, k1: number, k2: number, k3: number, p1: number, p2: number, lines: number): Float64Array;

export function flight_plan(pylons_csv: string, height: number, angle_deg: number, offset: number, v_min: number, v_max: number, spacing: number, max_gradient: number): Plan;

export function visibility_scene(tilt_deg: number, tau: number, buffer: number): VisibilityScene;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_plan_free: (a: number, b: number) => void;
    readonly __wbg_visibilityscene_free: (a: number, b: number) => void;
    readonly distortion_grid: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number, number];
    readonly flight_plan: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number];
    readonly plan_length: (a: number) => number;
    readonly plan_pylons: (a: number) => [number, number];
    readonly plan_waypoints: (a: number) => [number, number];
    readonly visibility_scene: (a: number, b: number, c: number) => [number, number, number];
    readonly visibilityscene_depth: (a: number) => [number, number];
    readonly visibilityscene_height: (a: number) => number;
    readonly visibilityscene_point_count: (a: number) => number;
    readonly visibilityscene_points: (a: number) => [number, number];
    readonly visibilityscene_visible_count: (a: number) => number;
    readonly visibilityscene_width: (a: number) => number;
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
