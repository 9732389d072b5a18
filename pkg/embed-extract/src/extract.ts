/**
 * Batch extraction: composed-input JSONL ({"id", "text"}) in,
 * sentence-vector JSONL ({"id", "vector"}) out, ids preserved in input
 * order, one output record per input record, uniform dimension.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { createEncoder, EncoderError, Pooling } from "./encoder.js";

export interface ExtractJob {
  inputPath: string;
  outputPath: string;
  encoderId: string;
  pooling: Pooling;
  maxTokens: number;
  batchSize: number;
}

export class InputError extends Error {}

export interface InputRecord {
  id: string;
  text: string;
}

export function readInputs(inputPath: string): InputRecord[] {
  let raw: string;
  try {
    raw = fs.readFileSync(inputPath, "utf-8");
  } catch (err) {
    throw new InputError(`cannot read ${inputPath}: ${(err as Error).message}`);
  }
  const records: InputRecord[] = [];
  const seen = new Set<string>();
  const lines = raw.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (!line) {
      continue;
    }
    let parsed: unknown;
    try {
      parsed = JSON.parse(line);
    } catch (err) {
      throw new InputError(`${inputPath}:${i + 1}: invalid JSON (${(err as Error).message})`);
    }
    const record = parsed as Record<string, unknown>;
    if (typeof record !== "object" || record === null ||
        typeof record.id !== "string" || typeof record.text !== "string") {
      throw new InputError(
        `${inputPath}:${i + 1}: expected an object with string "id" and "text"`,
      );
    }
    if (seen.has(record.id)) {
      throw new InputError(`${inputPath}:${i + 1}: duplicate id ${JSON.stringify(record.id)}`);
    }
    seen.add(record.id);
    records.push({ id: record.id, text: record.text });
  }
  return records;
}

export async function extract(job: ExtractJob): Promise<number> {
  const records = readInputs(job.inputPath);
  const encoder = await createEncoder(job.encoderId, job.pooling, job.maxTokens);

  const outLines: string[] = [];
  let dim: number | null = null;
  for (let start = 0; start < records.length; start += job.batchSize) {
    const batch = records.slice(start, start + job.batchSize);
    const vectors = await encoder.encodeBatch(batch.map((r) => r.text));
    if (vectors.length !== batch.length) {
      throw new EncoderError(
        `encoder returned ${vectors.length} vectors for a batch of ${batch.length}`,
      );
    }
    for (let i = 0; i < batch.length; i++) {
      const vector = vectors[i];
      if (dim === null) {
        dim = vector.length;
      } else if (vector.length !== dim) {
        throw new EncoderError(
          `inconsistent dimensions: id ${batch[i].id} got ${vector.length}, expected ${dim}`,
        );
      }
      if (!vector.every((v) => Number.isFinite(v))) {
        throw new EncoderError(`non-finite vector for id ${batch[i].id}`);
      }
      outLines.push(JSON.stringify({ id: batch[i].id, vector }));
    }
  }

  const tmpPath = job.outputPath + ".tmp";
  fs.mkdirSync(path.dirname(path.resolve(job.outputPath)), { recursive: true });
  fs.writeFileSync(tmpPath, outLines.join("\n") + (outLines.length ? "\n" : ""), "utf-8");
  fs.renameSync(tmpPath, job.outputPath);
  return records.length;
}
