/** Spectrogram rendering: dB matrix (freq x time) to pixels, peak lookup. */

import type { SpectrogramResponse } from "./api.js";

/** Map dB values in [floor, 0] to RGBA grayscale, low frequencies at the
 * bottom. Returns a buffer of width*height*4 bytes (width = time frames). */
export function toPixels(matrix: number[][], floorDb: number)
    : { pixels: Uint8ClampedArray<ArrayBuffer>; width: number; height: number } {
  const height = matrix.length;
  const width = height > 0 ? matrix[0].length : 0;
  const pixels = new Uint8ClampedArray(new ArrayBuffer(width * height * 4));
  const span = -floorDb || 1;
  for (let row = 0; row < height; row++) {
    const flippedRow = height - 1 - row;  // low freq at the bottom
    for (let col = 0; col < width; col++) {
      const value = Math.round(((matrix[row][col] - floorDb) / span) * 255);
      const offset = 4 * (flippedRow * width + col);
      pixels[offset] = value;
      pixels[offset + 1] = value;
      pixels[offset + 2] = value;
      pixels[offset + 3] = 255;
    }
  }
  return { pixels, width, height };
}

/** Frequency (Hz) of the strongest band, averaged over time. */
export function peakFrequency(response: SpectrogramResponse): number {
  const { matrix, freq_axis } = response;
  let bestRow = 0;
  let bestMean = -Infinity;
  for (let row = 0; row < matrix.length; row++) {
    let total = 0;
    for (const value of matrix[row]) total += value;
    const mean = total / matrix[row].length;
    if (mean > bestMean) {
      bestMean = mean;
      bestRow = row;
    }
  }
  return freq_axis[bestRow];
}
