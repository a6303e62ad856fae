/** Mask overlay helpers shared by the page and the tests.
 *
 * The service sends masks as grayscale PNGs whose pixel value is the class
 * id. Decoders hand us RGBA; the red channel carries the id.
 */

export const OVERLAY_ALPHA = 0.45;

// distinct hues for up to 8 classes; class id indexes this table mod length
export const CLASS_COLORS: ReadonlyArray<readonly [number, number, number]> = [
  [255, 64, 64],
  [64, 255, 64],
  [80, 144, 255],
  [255, 224, 32],
  [224, 64, 255],
  [64, 255, 224],
  [255, 144, 32],
  [144, 144, 255],
];

/** Class ids from decoded RGBA mask bytes (4 bytes per pixel). */
export function classesFromRgba(rgba: Uint8Array | Uint8ClampedArray): Uint8Array {
  if (rgba.length % 4 !== 0) {
    throw new RangeError(`RGBA byte length ${rgba.length} is not a multiple of 4`);
  }
  const out = new Uint8Array(rgba.length / 4);
  for (let i = 0; i < out.length; i++) {
    out[i] = rgba[i * 4]!;
  }
  return out;
}

/** Number of pixels the overlay would tint (any nonzero class). */
export function overlayPixelCount(classes: Uint8Array): number {
  let count = 0;
  for (let i = 0; i < classes.length; i++) {
    if (classes[i] !== 0) count++;
  }
  return count;
}

/** Translucent RGBA overlay buffer for putImageData; background pixels are
 * fully transparent. */
export function renderOverlay(
  classes: Uint8Array,
  alpha: number = OVERLAY_ALPHA,
): Uint8ClampedArray<ArrayBuffer> {
  const out = new Uint8ClampedArray(new ArrayBuffer(classes.length * 4));
  const a = Math.round(alpha * 255);
  for (let i = 0; i < classes.length; i++) {
    const id = classes[i]!;
    if (id === 0) continue;
    const color = CLASS_COLORS[(id - 1) % CLASS_COLORS.length]!;
    out[i * 4] = color[0];
    out[i * 4 + 1] = color[1];
    out[i * 4 + 2] = color[2];
    out[i * 4 + 3] = a;
  }
  return out;
}

/** Decode a base64 PNG into class ids using a canvas (browser only). */
export async function decodeMaskInBrowser(
  pngBase64: string,
): Promise<{ classes: Uint8Array; width: number; height: number }> {
  const bytes = Uint8Array.from(atob(pngBase64), (ch) => ch.charCodeAt(0));
  const bitmap = await createImageBitmap(new Blob([bytes], { type: "image/png" }));
  const canvas = document.createElement("canvas");
  canvas.width = bitmap.width;
  canvas.height = bitmap.height;
  const ctx = canvas.getContext("2d", { willReadFrequently: true });
  if (ctx === null) throw new Error("2d canvas context unavailable");
  ctx.drawImage(bitmap, 0, 0);
  const data = ctx.getImageData(0, 0, bitmap.width, bitmap.height).data;
  return {
    classes: classesFromRgba(data),
    width: bitmap.width,
    height: bitmap.height,
  };
}
