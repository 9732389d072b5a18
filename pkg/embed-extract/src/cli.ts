#!/usr/bin/env node
/**
 * embed-extract: turn composed-input JSONL into sentence-vector JSONL.
 *
 * Usage:
 *   embed-extract --in inputs.jsonl --out vectors.jsonl \
 *       --encoder Xenova/all-MiniLM-L6-v2 [--pooling cls_token|mean_tokens] \
 *       [--batch-size 16] [--max-tokens 32|128]
 *
 * The "hash:<dim>" encoder id selects the offline deterministic
 * encoder. Exit codes: 0 success, 1 usage error, 2 data/encoder error.
 */

import { EncoderError, Pooling } from "./encoder.js";
import { extract, InputError } from "./extract.js";

class UsageError extends Error {}

interface CliArgs {
  inputPath: string;
  outputPath: string;
  encoderId: string;
  pooling: Pooling;
  batchSize: number;
  maxTokens: number;
}

const FLAGS = new Set(["--in", "--out", "--encoder", "--pooling", "--batch-size", "--max-tokens"]);

function parseArgs(argv: string[]): CliArgs {
  const values = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const flag = argv[i];
    if (!FLAGS.has(flag)) {
      throw new UsageError(`unknown flag ${flag}`);
    }
    const value = argv[i + 1];
    if (value === undefined) {
      throw new UsageError(`flag ${flag} needs a value`);
    }
    values.set(flag, value);
  }
  for (const required of ["--in", "--out", "--encoder"]) {
    if (!values.has(required)) {
      throw new UsageError(`missing required flag ${required}`);
    }
  }
  const pooling = values.get("--pooling") ?? "cls_token";
  if (pooling !== "cls_token" && pooling !== "mean_tokens") {
    throw new UsageError(`--pooling must be cls_token or mean_tokens, got ${pooling}`);
  }
  const batchSize = parseInt(values.get("--batch-size") ?? "16", 10);
  if (!Number.isInteger(batchSize) || batchSize < 1) {
    throw new UsageError(`--batch-size must be a positive integer`);
  }
  const maxTokens = parseInt(values.get("--max-tokens") ?? "128", 10);
  if (maxTokens !== 32 && maxTokens !== 128) {
    throw new UsageError(`--max-tokens must be 32 or 128, got ${values.get("--max-tokens")}`);
  }
  return {
    inputPath: values.get("--in")!,
    outputPath: values.get("--out")!,
    encoderId: values.get("--encoder")!,
    pooling,
    batchSize,
    maxTokens,
  };
}

export async function main(argv: string[]): Promise<number> {
  let args: CliArgs;
  try {
    args = parseArgs(argv);
  } catch (err) {
    if (err instanceof UsageError) {
      process.stderr.write(`usage error: ${err.message}\n`);
      return 1;
    }
    throw err;
  }
  try {
    const count = await extract({
      inputPath: args.inputPath,
      outputPath: args.outputPath,
      encoderId: args.encoderId,
      pooling: args.pooling,
      maxTokens: args.maxTokens,
      batchSize: args.batchSize,
    });
    process.stderr.write(`wrote ${count} vectors to ${args.outputPath}\n`);
    return 0;
  } catch (err) {
    if (err instanceof InputError || err instanceof EncoderError) {
      process.stderr.write(`error: ${err.message}\n`);
      return 2;
    }
    throw err;
  }
}

main(process.argv.slice(2)).then((code) => {
  process.exitCode = code;
});
