/** RGB image buffers and PNG transport (base64 on the wire). */

import { PNG } from "pngjs";

export interface RgbImage {
  width: number;
  height: number;
  /** Row-major RGB, length width * height * 3. */
  data: Buffer;
}

export function createImage(width: number, height: number, fill = 0): RgbImage {
  return { width, height, data: Buffer.alloc(width * height * 3, fill) };
}

export function encodePngBase64(image: RgbImage): string {
  const png = new PNG({ width: image.width, height: image.height });
  for (let i = 0; i < image.width * image.height; i++) {
    png.data[i * 4] = image.data[i * 3];
    png.data[i * 4 + 1] = image.data[i * 3 + 1];
    png.data[i * 4 + 2] = image.data[i * 3 + 2];
    png.data[i * 4 + 3] = 255;
  }
  return PNG.sync.write(png).toString("base64");
}

export function decodePngBase64(encoded: string): RgbImage {
  const png = PNG.sync.read(Buffer.from(encoded, "base64"));
  const data = Buffer.alloc(png.width * png.height * 3);
  for (let i = 0; i < png.width * png.height; i++) {
    data[i * 3] = png.data[i * 4];
    data[i * 3 + 1] = png.data[i * 4 + 1];
    data[i * 3 + 2] = png.data[i * 4 + 2];
  }
  return { width: png.width, height: png.height, data };
}
