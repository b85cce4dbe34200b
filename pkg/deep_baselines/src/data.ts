import fs from "node:fs";
import path from "node:path";

export interface FixedSample {
  sampleId: string;
  userId: string;
  session: number;
  attempt: number;
  label: string;
  /** Row-major [length][9] matrix: acc xyz, linacc xyz, gyro xyz. */
  matrix: Float32Array;
  length: number;
}

export interface FixedExport {
  length: number;
  channels: string[];
  samples: FixedSample[];
}

export const SENSOR_COLUMNS: Record<string, number[]> = {
  acc: [0, 1, 2],
  linacc: [3, 4, 5],
  gyro: [6, 7, 8],
};

/** Load the primary toolkit's fixed-length CSV export. */
export function loadFixedExport(dir: string): FixedExport {
  const manifestPath = path.join(dir, "fixed_manifest.json");
  const manifest = JSON.parse(fs.readFileSync(manifestPath, "utf-8"));
  const length: number = manifest.length;
  const samples: FixedSample[] = manifest.samples.map((entry: Record<string, unknown>) => {
    const file = path.join(dir, entry.file as string);
    const lines = fs.readFileSync(file, "utf-8").trim().split("\n");
    if (lines.length - 1 !== length) {
      throw new Error(`${file}: expected ${length} rows, found ${lines.length - 1}`);
    }
    const matrix = new Float32Array(length * 9);
    for (let row = 0; row < length; row++) {
      const cells = lines[row + 1].split(",");
      for (let col = 0; col < 9; col++) {
        matrix[row * 9 + col] = Number(cells[col]);
      }
    }
    return {
      sampleId: entry.sample_id as string,
      userId: entry.user_id as string,
      session: entry.session as number,
      attempt: entry.attempt as number,
      label: entry.label as string,
      matrix,
      length,
    };
  });
  return { length, channels: manifest.channels, samples };
}

export interface SplitManifest {
  seed: number;
  train: string[];
  test: string[];
}

export function loadSplit(file: string): SplitManifest {
  return JSON.parse(fs.readFileSync(file, "utf-8"));
}

/** Column indices for a sensor selection like ["acc", "gyro"]. */
export function sensorColumns(sensors: string[]): number[] {
  const columns: number[] = [];
  for (const sensor of sensors) {
    const cols = SENSOR_COLUMNS[sensor];
    if (!cols) {
      throw new Error(`unknown sensor ${sensor}; expected acc, linacc, gyro`);
    }
    columns.push(...cols);
  }
  return columns;
}

/** Extract the selected channels as a dense [length * C] array. */
export function selectChannels(sample: FixedSample, columns: number[]): Float32Array {
  const out = new Float32Array(sample.length * columns.length);
  for (let row = 0; row < sample.length; row++) {
    for (let c = 0; c < columns.length; c++) {
      out[row * columns.length + c] = sample.matrix[row * 9 + columns[c]];
    }
  }
  return out;
}

export interface Pair {
  a: FixedSample;
  b: FixedSample;
  label: number; // 1 genuine pair, 0 impostor pair
}

/** Deterministic xorshift-style RNG so pair sampling is reproducible. */
export function makeRng(seed: number): () => number {
  let state = seed >>> 0 || 1;
  return () => {
    state ^= state << 13;
    state ^= state >>> 17;
    state ^= state << 5;
    state >>>= 0;
    return state / 0xffffffff;
  };
}

/**
 * Training pairs from the given users: genuine-genuine positives, and
 * negatives mixing random impostors (other users' genuine samples) with
 * the user's skilled forgeries.
 */
export function buildPairs(
  samples: FixedSample[],
  users: string[],
  count: number,
  seed: number
): Pair[] {
  const userSet = new Set(users);
  const genuine = samples.filter((s) => s.label === "genuine" && userSet.has(s.userId));
  const forgeries = samples.filter(
    (s) => s.label === "skilled_forgery" && userSet.has(s.userId)
  );
  const byUser = new Map<string, FixedSample[]>();
  for (const s of genuine) {
    const list = byUser.get(s.userId) ?? [];
    list.push(s);
    byUser.set(s.userId, list);
  }
  const forgeriesByUser = new Map<string, FixedSample[]>();
  for (const s of forgeries) {
    const list = forgeriesByUser.get(s.userId) ?? [];
    list.push(s);
    forgeriesByUser.set(s.userId, list);
  }
  const ids = [...byUser.keys()].sort();
  if (ids.length < 2) {
    throw new Error("need genuine samples from at least two users to build pairs");
  }
  const rng = makeRng(seed);
  const pick = <T>(list: T[]): T => list[Math.floor(rng() * list.length) % list.length];
  const pairs: Pair[] = [];
  while (pairs.length < count) {
    const roll = rng();
    if (roll < 0.5) {
      const user = pick(ids);
      const own = byUser.get(user)!;
      if (own.length < 2) continue;
      const a = pick(own);
      let b = pick(own);
      while (b === a) b = pick(own);
      pairs.push({ a, b, label: 1 });
    } else if (roll < 0.75 || forgeries.length === 0) {
      const user = pick(ids);
      let other = pick(ids);
      while (other === user) other = pick(ids);
      pairs.push({ a: pick(byUser.get(user)!), b: pick(byUser.get(other)!), label: 0 });
    } else {
      const withForgeries = ids.filter((u) => forgeriesByUser.has(u));
      if (withForgeries.length === 0) continue;
      const user = pick(withForgeries);
      pairs.push({
        a: pick(byUser.get(user)!),
        b: pick(forgeriesByUser.get(user)!),
        label: 0,
      });
    }
  }
  return pairs;
}
