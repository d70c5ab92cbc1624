export interface Point {
  x: number;
  y: number;
}

export interface Rect {
  x: number;
  y: number;
  w: number;
  h: number;
}

export interface Preview {
  ar: string;
  rect: Rect;
}

export interface Candidate {
  point: Point;
  score: number;
  previews: Preview[];
}

export interface CandidatesResponse {
  candidates: Candidate[];
  symmetric: boolean;
}

export interface SaliencyGrid {
  grid_w: number;
  grid_h: number;
  source_w: number;
  source_h: number;
  scores: number[][];
}

export interface CropResponse {
  ar: string;
  rect: Rect;
  focal: Point;
  selected: boolean;
}

export function rectContains(rect: Rect, p: Point): boolean {
  return p.x >= rect.x && p.x < rect.x + rect.w && p.y >= rect.y && p.y < rect.y + rect.h;
}
