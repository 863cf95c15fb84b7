/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_plan_free: (a: number, b: number) => void;
export const __wbg_visibilityscene_free: (a: number, b: number) => void;
export const distortion_grid: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number, number];
export const flight_plan: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number];
export const plan_length: (a: number) => number;
export const plan_pylons: (a: number) => [number, number];
export const plan_waypoints: (a: number) => [number, number];
export const visibility_scene: (a: number, b: number, c: number) => [number, number, number];
export const visibilityscene_depth: (a: number) => [number, number];
export const visibilityscene_height: (a: number) => number;
export const visibilityscene_point_count: (a: number) => number;
export const visibilityscene_points: (a: number) => [number, number];
export const visibilityscene_visible_count: (a: number) => number;
export const visibilityscene_width: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
