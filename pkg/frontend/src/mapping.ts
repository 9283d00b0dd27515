/**
 * Labelling session state and the cluster-to-class mapping it exports.
 *
 * The exported file must satisfy the same rules the core toolkit enforces
 * before classification: every cluster assigned, C <= P, every class used
 * by at least one cluster (surjective), and unique complexity ranks.
 */

export interface SnippetRef {
  file: string;
  distance: number;
}

export interface ClusterEntry {
  id: number;
  count: number;
  snippets: SnippetRef[];
}

export interface BundleManifest {
  P: number;
  clusters: ClusterEntry[];
}

export interface LabelClassDef {
  name: string;
  complexity_rank: number;
}

export interface LabelMappingFile {
  P: number;
  C: number;
  map: number[];
  classes: LabelClassDef[];
}

export interface LabelSession {
  manifest: BundleManifest;
  /** Per cluster: index into `palette`, or null while undecided. */
  assignments: (number | null)[];
  palette: LabelClassDef[];
  /** Snippet files referenced by the manifest but absent from the bundle. */
  missingFiles: string[];
}

export function parseManifest(data: unknown): BundleManifest {
  if (typeof data !== 'object' || data === null) {
    throw new Error('manifest is not a JSON object');
  }
  const m = data as Record<string, unknown>;
  if (!Number.isInteger(m.P) || (m.P as number) < 1) {
    throw new Error('manifest P must be a positive integer');
  }
  if (!Array.isArray(m.clusters)) {
    throw new Error('manifest clusters must be an array');
  }
  const P = m.P as number;
  if (m.clusters.length !== P) {
    throw new Error(`manifest has ${m.clusters.length} clusters, expected P=${P}`);
  }
  const clusters = m.clusters.map((raw, i) => {
    const c = raw as Record<string, unknown>;
    if (c.id !== i) {
      throw new Error(`cluster ${i} has id ${c.id}; ids must be 0..P-1 in order`);
    }
    if (!Number.isInteger(c.count) || (c.count as number) < 0) {
      throw new Error(`cluster ${i} count must be a non-negative integer`);
    }
    if (!Array.isArray(c.snippets)) {
      throw new Error(`cluster ${i} snippets must be an array`);
    }
    const snippets = c.snippets.map((s) => {
      const sn = s as Record<string, unknown>;
      if (typeof sn.file !== 'string' || typeof sn.distance !== 'number') {
        throw new Error(`cluster ${i} has a malformed snippet entry`);
      }
      return { file: sn.file, distance: sn.distance };
    });
    // Galleries show nearest representatives first.
    snippets.sort((a, b) => a.distance - b.distance);
    return { id: i, count: c.count as number, snippets };
  });
  return { P, clusters };
}

export function createSession(
  manifest: BundleManifest,
  missingFiles: string[] = [],
): LabelSession {
  return {
    manifest,
    assignments: new Array(manifest.P).fill(null),
    palette: [],
    missingFiles: [...missingFiles],
  };
}

function nextFreeRank(palette: LabelClassDef[]): number {
  const used = new Set(palette.map((k) => k.complexity_rank));
  let r = 0;
  while (used.has(r)) r += 1;
  return r;
}

/** Add a class to the palette; returns its index. */
export function addClass(session: LabelSession, name: string): number {
  session.palette.push({ name, complexity_rank: nextFreeRank(session.palette) });
  return session.palette.length - 1;
}

export function renameClass(session: LabelSession, index: number, name: string): void {
  session.palette[index].name = name;
}

export function setRank(session: LabelSession, index: number, rank: number): void {
  session.palette[index].complexity_rank = rank;
}

/** Remove a palette class; clusters assigned to it become unassigned. */
export function removeClass(session: LabelSession, index: number): void {
  session.palette.splice(index, 1);
  session.assignments = session.assignments.map((a) => {
    if (a === null || a < index) return a;
    if (a === index) return null;
    return a - 1;
  });
}

/**
 * Assign a cluster to a palette class. Assigning several clusters the same
 * class is how clusters merge: they share one class id in the export.
 */
export function assignCluster(
  session: LabelSession,
  cluster: number,
  classIndex: number | null,
): void {
  if (cluster < 0 || cluster >= session.manifest.P) {
    throw new Error(`no cluster ${cluster}`);
  }
  if (classIndex !== null && (classIndex < 0 || classIndex >= session.palette.length)) {
    throw new Error(`no class ${classIndex}`);
  }
  session.assignments[cluster] = classIndex;
}

/** Human-readable blockers; export is enabled only when this is empty. */
export function validateSession(session: LabelSession): string[] {
  const errors: string[] = [];
  const P = session.manifest.P;
  const C = session.palette.length;
  if (C === 0) {
    errors.push('no classes defined');
  }
  const unassigned = session.assignments
    .map((a, i) => (a === null ? i : -1))
    .filter((i) => i >= 0);
  if (unassigned.length > 0) {
    errors.push(`clusters unassigned: ${unassigned.join(', ')}`);
  }
  if (C > P) {
    errors.push(`too many classes: C=${C} > P=${P}`);
  }
  const used = new Set(session.assignments.filter((a) => a !== null));
  const unusedNames = session.palette
    .filter((_, i) => !used.has(i))
    .map((k) => k.name);
  if (C > 0 && unassigned.length === 0 && unusedNames.length > 0) {
    errors.push(`classes never assigned (mapping not surjective): ${unusedNames.join(', ')}`);
  }
  const ranks = session.palette.map((k) => k.complexity_rank);
  if (new Set(ranks).size !== ranks.length) {
    errors.push('complexity ranks must be unique');
  }
  return errors;
}

export function buildMapping(session: LabelSession): LabelMappingFile {
  const errors = validateSession(session);
  if (errors.length > 0) {
    throw new Error(`session not exportable: ${errors.join('; ')}`);
  }
  return {
    P: session.manifest.P,
    C: session.palette.length,
    map: session.assignments.map((a) => a as number),
    classes: session.palette.map((k) => ({
      name: k.name,
      complexity_rank: k.complexity_rank,
    })),
  };
}

/** Canonical serialisation: fixed key order so round trips are byte-stable. */
export function serializeMapping(mapping: LabelMappingFile): string {
  const ordered = {
    P: mapping.P,
    C: mapping.C,
    map: mapping.map,
    classes: mapping.classes.map((k) => ({
      name: k.name,
      complexity_rank: k.complexity_rank,
    })),
  };
  return JSON.stringify(ordered, null, 2) + '\n';
}

export function parseMapping(text: string): LabelMappingFile {
  const data = JSON.parse(text) as Record<string, unknown>;
  if (!Number.isInteger(data.P) || !Number.isInteger(data.C)) {
    throw new Error('mapping P and C must be integers');
  }
  if (!Array.isArray(data.map) || !Array.isArray(data.classes)) {
    throw new Error('mapping must carry map and classes arrays');
  }
  const classes = (data.classes as unknown[]).map((raw, i) => {
    const k = raw as Record<string, unknown>;
    if (typeof k.name !== 'string' || !Number.isInteger(k.complexity_rank)) {
      throw new Error(`class entry ${i} is malformed`);
    }
    return { name: k.name, complexity_rank: k.complexity_rank as number };
  });
  const map = (data.map as unknown[]).map((v, i) => {
    if (!Number.isInteger(v)) throw new Error(`map entry ${i} is not an integer`);
    return v as number;
  });
  return { P: data.P as number, C: data.C as number, map, classes };
}

/** Re-open an exported mapping against a bundle for further editing. */
export function importMapping(
  manifest: BundleManifest,
  mapping: LabelMappingFile,
): LabelSession {
  if (mapping.P !== manifest.P) {
    throw new Error(`mapping P=${mapping.P} does not match bundle P=${manifest.P}`);
  }
  if (mapping.map.length !== mapping.P || mapping.classes.length !== mapping.C) {
    throw new Error('mapping sizes are inconsistent');
  }
  const session = createSession(manifest);
  session.palette = mapping.classes.map((k) => ({ ...k }));
  session.assignments = mapping.map.map((v, i) => {
    if (v < 0 || v >= mapping.C) {
      throw new Error(`map entry ${i} (${v}) outside [0, ${mapping.C})`);
    }
    return v;
  });
  return session;
}
