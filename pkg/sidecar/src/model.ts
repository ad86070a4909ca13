/**
 * Model layer behind the wire protocol.
 *
 * The server only talks to these interfaces, so a deployment can swap in a
 * real diffusion/detector stack; the built-in "procedural" pair keeps the
 * sidecar self-contained and fully deterministic (seed in, bytes out). The
 * resolved parameter set is recorded in the provenance string returned with
 * every image.
 */

import { RgbImage, createImage } from "./png";
import { SplitMix64, fnv1a64, mix } from "./rng";

export interface Txt2ImgParams {
  prompt: string;
  steps: number;
  guidance: number;
  width: number;
  height: number;
  seed: number;
}

export interface Img2ImgParams {
  prompt: string;
  base: RgbImage;
  steps: number;
  guidance: number;
  strength: number;
  seed: number;
}

export interface Detection {
  label: string;
  confidence: number;
  bbox: [number, number, number, number];
}

export interface SynthesisResult {
  image: RgbImage;
  provenance: string;
}

/** Model calls may be synchronous (the procedural pair) or async (a real
 * inference stack); the server awaits either. */
export interface SynthesisModel {
  name: string;
  txt2img(params: Txt2ImgParams): SynthesisResult | Promise<SynthesisResult>;
  img2img(params: Img2ImgParams): SynthesisResult | Promise<SynthesisResult>;
}

export interface DetectionModel {
  name: string;
  detect(image: RgbImage): Detection[] | Promise<Detection[]>;
}

// Saturated fills keyed by color words; anything else falls back to magenta.
const PALETTE: Record<string, [number, number, number]> = {
  black: [85, 25, 95],
  white: [235, 205, 100],
  gray: [135, 150, 55],
  silver: [80, 150, 210],
  blue: [50, 60, 210],
  red: [200, 40, 40],
  green: [40, 200, 40],
  brown: [150, 90, 35],
};
const FALLBACK_FILL: [number, number, number] = [200, 40, 180];

function promptFill(prompt: string): [number, number, number] {
  const match = prompt.match(new RegExp(`\\b(${Object.keys(PALETTE).join("|")})\\b`));
  return match ? PALETTE[match[1]] : FALLBACK_FILL;
}

function paintBackground(image: RgbImage, stream: SplitMix64): void {
  const base = 96 + stream.randBelow(64);
  // Coarse 16px lattice, bilinear fixed-point upsample: cheap smooth texture.
  const cell = 16;
  const gw = Math.floor(image.width / cell) + 2;
  const gh = Math.floor(image.height / cell) + 2;
  const grid = new Int32Array(gw * gh);
  for (let i = 0; i < grid.length; i++) {
    grid[i] = base - 24 + stream.randBelow(49);
  }
  for (let y = 0; y < image.height; y++) {
    const gy = Math.floor(y / cell);
    const fy = y - gy * cell;
    for (let x = 0; x < image.width; x++) {
      const gx = Math.floor(x / cell);
      const fx = x - gx * cell;
      const v =
        (grid[gy * gw + gx] * (cell - fx) * (cell - fy) +
          grid[gy * gw + gx + 1] * fx * (cell - fy) +
          grid[(gy + 1) * gw + gx] * (cell - fx) * fy +
          grid[(gy + 1) * gw + gx + 1] * fx * fy +
          128) >>
        8;
      const o = (y * image.width + x) * 3;
      image.data[o] = v;
      image.data[o + 1] = v;
      image.data[o + 2] = v;
    }
  }
}

function paintCar(image: RgbImage, stream: SplitMix64, fill: [number, number, number]): void {
  const w = image.width;
  const h = image.height;
  const bw = Math.max(1, Math.floor((w * 28) / 100) + stream.randBelow(Math.max(1, Math.floor((w * 27) / 100) + 1)));
  const bh = Math.max(1, Math.floor((h * 22) / 100) + stream.randBelow(Math.max(1, Math.floor((h * 23) / 100) + 1)));
  const mx = Math.floor(w / 16);
  const my = Math.floor(h / 16);
  const x0 = mx + stream.randBelow(Math.max(1, w - bw - 2 * mx + 1));
  const y0 = my + stream.randBelow(Math.max(1, h - bh - 2 * my + 1));
  const band = y0 + Math.floor((3 * bh) / 4);
  for (let y = y0; y < y0 + bh; y++) {
    for (let x = x0; x < x0 + bw; x++) {
      const delta = stream.randBelow(25) - 12 - (y >= band ? 30 : 0);
      const o = (y * w + x) * 3;
      image.data[o] = Math.min(255, Math.max(0, fill[0] + delta));
      image.data[o + 1] = Math.min(255, Math.max(0, fill[1] + delta));
      image.data[o + 2] = Math.min(255, Math.max(0, fill[2] + delta));
    }
  }
}

export class ProceduralSynthesisModel implements SynthesisModel {
  name = "procedural";

  constructor(private device: string) {}

  private render(prompt: string, seed: number, width: number, height: number, extra: bigint): RgbImage {
    const stream = new SplitMix64(mix(fnv1a64(prompt), BigInt(seed), extra));
    const image = createImage(width, height);
    paintBackground(image, stream);
    paintCar(image, stream, promptFill(prompt));
    return image;
  }

  txt2img(p: Txt2ImgParams) {
    // steps/guidance feed the stream: different settings, different image.
    const extra = mix(BigInt(p.steps), BigInt(Math.round(p.guidance * 1000)));
    const image = this.render(p.prompt, p.seed, p.width, p.height, extra);
    const provenance = `${this.name}/txt2img@${this.device}:steps=${p.steps},guidance=${p.guidance}`;
    return { image, provenance };
  }

  img2img(p: Img2ImgParams) {
    const extra = mix(
      BigInt(p.steps),
      BigInt(Math.round(p.guidance * 1000)),
      BigInt(Math.round(p.strength * 1000)),
    );
    const rendered = this.render(p.prompt, p.seed, p.base.width, p.base.height, extra);
    // Honor the strength semantics: blend toward the base image.
    const keep = 1 - p.strength;
    const image = createImage(p.base.width, p.base.height);
    for (let i = 0; i < image.data.length; i++) {
      image.data[i] = Math.round(p.base.data[i] * keep + rendered.data[i] * p.strength);
    }
    const provenance =
      `${this.name}/img2img@${this.device}:steps=${p.steps},guidance=${p.guidance},strength=${p.strength}`;
    return { image, provenance };
  }
}

/** Connected components over an HSV-saturation threshold (S > 0.5). */
export class SaturationDetectionModel implements DetectionModel {
  name = "saturation";

  detect(image: RgbImage): Detection[] {
    const { width, height, data } = image;
    const mask = new Uint8Array(width * height);
    for (let i = 0; i < width * height; i++) {
      const r = data[i * 3];
      const g = data[i * 3 + 1];
      const b = data[i * 3 + 2];
      const max = Math.max(r, g, b);
      const min = Math.min(r, g, b);
      mask[i] = max > 2 * min ? 1 : 0;
    }
    const minArea = 0.005 * width * height;
    const seen = new Uint8Array(width * height);
    const detections: Detection[] = [];
    const stack: number[] = [];
    for (let start = 0; start < mask.length; start++) {
      if (!mask[start] || seen[start]) continue;
      let minX = width, maxX = 0, minY = height, maxY = 0, area = 0;
      stack.push(start);
      seen[start] = 1;
      while (stack.length) {
        const idx = stack.pop()!;
        const x = idx % width;
        const y = Math.floor(idx / width);
        area++;
        if (x < minX) minX = x;
        if (x > maxX) maxX = x;
        if (y < minY) minY = y;
        if (y > maxY) maxY = y;
        const neighbors = [idx - 1, idx + 1, idx - width, idx + width];
        if (x === 0) neighbors[0] = -1;
        if (x === width - 1) neighbors[1] = -1;
        for (const n of neighbors) {
          if (n >= 0 && n < mask.length && mask[n] && !seen[n]) {
            seen[n] = 1;
            stack.push(n);
          }
        }
      }
      if (area < minArea) continue;
      const bw = maxX - minX + 1;
      const bh = maxY - minY + 1;
      detections.push({
        label: "car",
        confidence: Math.min(1, area / (bw * bh)),
        bbox: [minX / width, minY / height, bw / width, bh / height],
      });
    }
    detections.sort((a, b) => b.confidence - a.confidence || a.bbox[0] - b.bbox[0]);
    return detections;
  }
}

export function resolveSynthesisModel(identifier: string, device: string): SynthesisModel {
  if (identifier === "procedural") {
    return new ProceduralSynthesisModel(device);
  }
  throw new Error(`cannot load synthesis model ${identifier}: not available in this build`);
}

export function resolveDetectionModel(identifier: string): DetectionModel {
  if (identifier === "saturation") {
    return new SaturationDetectionModel();
  }
  throw new Error(`cannot load detection model ${identifier}: not available in this build`);
}
