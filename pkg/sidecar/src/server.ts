/**
 * HTTP surface: /v1/txt2img, /v1/img2img, /v1/detect.
 *
 * Bodies are UTF-8 JSON, images base64 PNG. Every failure is JSON with an
 * "error" field; requests beyond the concurrency budget are shed with 429 so
 * clients retry with backoff.
 */

import express, { Express, NextFunction, Request, Response } from "express";

import { DetectionModel, SynthesisModel } from "./model";
import { decodePngBase64, encodePngBase64 } from "./png";

export interface ServerOptions {
  synthesis: SynthesisModel;
  detection: DetectionModel;
  maxConcurrent: number;
  /** Refuse absurd allocations instead of dying on them. */
  maxSidePixels?: number;
}

const MAX_SAFE_SEED = Number.MAX_SAFE_INTEGER;

class RequestErrorBody extends Error {}

function asInt(body: Record<string, unknown>, field: string): number {
  const v = body[field];
  if (typeof v !== "number" || !Number.isInteger(v)) {
    throw new RequestErrorBody(`field "${field}" must be an integer`);
  }
  return v;
}

function asNumber(body: Record<string, unknown>, field: string): number {
  const v = body[field];
  if (typeof v !== "number" || Number.isNaN(v)) {
    throw new RequestErrorBody(`field "${field}" must be a number`);
  }
  return v;
}

function asString(body: Record<string, unknown>, field: string): string {
  const v = body[field];
  if (typeof v !== "string" || v.length === 0) {
    throw new RequestErrorBody(`field "${field}" must be a non-empty string`);
  }
  return v;
}

function checkSeed(seed: number): number {
  if (seed < 0 || seed > MAX_SAFE_SEED) {
    throw new RequestErrorBody(`field "seed" must be in [0, ${MAX_SAFE_SEED}]`);
  }
  return seed;
}

function checkCommon(steps: number, guidance: number): void {
  if (steps < 1) throw new RequestErrorBody('field "steps" must be >= 1');
  if (guidance < 0) throw new RequestErrorBody('field "guidance" must be >= 0');
}

export function createServer(options: ServerOptions): Express {
  const app = express();
  const maxSide = options.maxSidePixels ?? 4096;
  let inFlight = 0;

  app.use(express.json({ limit: "64mb" }));

  // Body-parse failures must still produce the protocol's error shape.
  app.use((err: Error, _req: Request, res: Response, next: NextFunction) => {
    if (err) {
      res.status(400).json({ error: `invalid request body: ${err.message}` });
      return;
    }
    next();
  });

  const guarded = (handler: (req: Request, res: Response) => Promise<void>) => {
    return async (req: Request, res: Response) => {
      if (inFlight >= options.maxConcurrent) {
        res.status(429).json({ error: "over capacity, retry later" });
        return;
      }
      inFlight++;
      try {
        await handler(req, res);
      } catch (err) {
        if (err instanceof RequestErrorBody) {
          res.status(400).json({ error: err.message });
        } else {
          res.status(500).json({ error: `internal error: ${(err as Error).message}` });
        }
      } finally {
        inFlight--;
      }
    };
  };

  app.post(
    "/v1/txt2img",
    guarded(async (req, res) => {
      const body = req.body as Record<string, unknown>;
      const prompt = asString(body, "prompt");
      const steps = asInt(body, "steps");
      const guidance = asNumber(body, "guidance");
      const width = asInt(body, "width");
      const height = asInt(body, "height");
      const seed = checkSeed(asInt(body, "seed"));
      checkCommon(steps, guidance);
      if (width < 1 || height < 1 || width > maxSide || height > maxSide) {
        throw new RequestErrorBody(`width/height must be in [1, ${maxSide}]`);
      }
      const { image, provenance } = await options.synthesis.txt2img({
        prompt,
        steps,
        guidance,
        width,
        height,
        seed,
      });
      res.json({ image: encodePngBase64(image), model: provenance });
    }),
  );

  app.post(
    "/v1/img2img",
    guarded(async (req, res) => {
      const body = req.body as Record<string, unknown>;
      const prompt = asString(body, "prompt");
      const steps = asInt(body, "steps");
      const guidance = asNumber(body, "guidance");
      const strength = asNumber(body, "strength");
      const seed = checkSeed(asInt(body, "seed"));
      checkCommon(steps, guidance);
      if (strength < 0 || strength > 1) {
        throw new RequestErrorBody('field "strength" must be in [0, 1]');
      }
      let base;
      try {
        base = decodePngBase64(asString(body, "image"));
      } catch (err) {
        throw new RequestErrorBody(`field "image" is not a decodable PNG: ${(err as Error).message}`);
      }
      const { image, provenance } = await options.synthesis.img2img({
        prompt,
        base,
        steps,
        guidance,
        strength,
        seed,
      });
      res.json({ image: encodePngBase64(image), model: provenance });
    }),
  );

  app.post(
    "/v1/detect",
    guarded(async (req, res) => {
      const body = req.body as Record<string, unknown>;
      let image;
      try {
        image = decodePngBase64(asString(body, "image"));
      } catch (err) {
        throw new RequestErrorBody(`field "image" is not a decodable PNG: ${(err as Error).message}`);
      }
      const detections = await options.detection.detect(image);
      res.json({ detections });
    }),
  );

  app.use((_req: Request, res: Response) => {
    res.status(404).json({ error: "unknown endpoint" });
  });

  return app;
}
