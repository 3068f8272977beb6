/**
 * Minimal RIFF/WAVE codec for the formats the core emits and accepts:
 * 32-bit IEEE float (written and read) and 16-bit PCM (read only).
 */

export interface WavData {
  sampleRate: number;
  /** One Float32Array per channel. */
  channels: Float32Array[];
}

export function decodeWav(buf: Buffer): WavData {
  if (buf.length < 12 || buf.toString("ascii", 0, 4) !== "RIFF" || buf.toString("ascii", 8, 12) !== "WAVE") {
    throw new Error("not a RIFF/WAVE file");
  }
  let offset = 12;
  let format = 0;
  let nChannels = 0;
  let sampleRate = 0;
  let bitsPerSample = 0;
  let data: Buffer | null = null;
  while (offset + 8 <= buf.length) {
    const id = buf.toString("ascii", offset, offset + 4);
    const size = buf.readUInt32LE(offset + 4);
    const body = offset + 8;
    if (id === "fmt ") {
      format = buf.readUInt16LE(body);
      nChannels = buf.readUInt16LE(body + 2);
      sampleRate = buf.readUInt32LE(body + 4);
      bitsPerSample = buf.readUInt16LE(body + 14);
    } else if (id === "data") {
      data = buf.subarray(body, body + size);
    }
    offset = body + size + (size % 2);
  }
  if (data === null || nChannels === 0) {
    throw new Error("missing fmt or data chunk");
  }
  const bytesPer = bitsPerSample / 8;
  const frames = Math.floor(data.length / (bytesPer * nChannels));
  const channels: Float32Array[] = [];
  for (let c = 0; c < nChannels; c++) {
    channels.push(new Float32Array(frames));
  }
  for (let i = 0; i < frames; i++) {
    for (let c = 0; c < nChannels; c++) {
      const at = (i * nChannels + c) * bytesPer;
      if (format === 3 && bitsPerSample === 32) {
        channels[c][i] = data.readFloatLE(at);
      } else if (format === 1 && bitsPerSample === 16) {
        channels[c][i] = data.readInt16LE(at) / 32768;
      } else {
        throw new Error(`unsupported WAV format ${format}/${bitsPerSample}-bit`);
      }
    }
  }
  return { sampleRate, channels };
}

export function encodeWavFloat32(channels: Float32Array[], sampleRate: number): Buffer {
  const nChannels = channels.length;
  if (nChannels === 0) throw new Error("need at least one channel");
  const frames = channels[0].length;
  for (const ch of channels) {
    if (ch.length !== frames) throw new Error("all channels must share one length");
  }
  const dataSize = frames * nChannels * 4;
  const buf = Buffer.alloc(44 + dataSize);
  buf.write("RIFF", 0, "ascii");
  buf.writeUInt32LE(36 + dataSize, 4);
  buf.write("WAVE", 8, "ascii");
  buf.write("fmt ", 12, "ascii");
  buf.writeUInt32LE(16, 16);
  buf.writeUInt16LE(3, 20); // IEEE float
  buf.writeUInt16LE(nChannels, 22);
  buf.writeUInt32LE(sampleRate, 24);
  buf.writeUInt32LE(sampleRate * nChannels * 4, 28);
  buf.writeUInt16LE(nChannels * 4, 32);
  buf.writeUInt16LE(32, 34);
  buf.write("data", 36, "ascii");
  buf.writeUInt32LE(dataSize, 40);
  for (let i = 0; i < frames; i++) {
    for (let c = 0; c < nChannels; c++) {
      buf.writeFloatLE(channels[c][i], 44 + (i * nChannels + c) * 4);
    }
  }
  return buf;
}

/** Raw little-endian bytes of the sample data, for bit-exact comparisons. */
export function rawSampleBytes(channels: Float32Array[]): Buffer {
  const nChannels = channels.length;
  const frames = channels[0]?.length ?? 0;
  const out = Buffer.alloc(frames * nChannels * 4);
  for (let i = 0; i < frames; i++) {
    for (let c = 0; c < nChannels; c++) {
      out.writeFloatLE(channels[c][i], (i * nChannels + c) * 4);
    }
  }
  return out;
}
