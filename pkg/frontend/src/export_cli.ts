/**
 * Headless driver for the labelling session, for scripted use and
 * integration tests.
 *
 *   node dist/export_cli.js export <bundle_dir> <assignments.json> <out.json>
 *   node dist/export_cli.js roundtrip <bundle_dir> <mapping.json> <out.json>
 *
 * assignments.json: { "classes": [{ "name", "complexity_rank" }...],
 *                     "map": [classIndex per cluster] }
 * `roundtrip` imports an exported mapping and re-exports it unchanged.
 */
import * as fs from 'node:fs';
import * as path from 'node:path';

import { findMissingFiles } from './bundle.js';
import {
  assignCluster,
  buildMapping,
  createSession,
  importMapping,
  parseManifest,
  parseMapping,
  serializeMapping,
  validateSession,
} from './mapping.js';

function loadManifest(bundleDir: string) {
  const raw = fs.readFileSync(path.join(bundleDir, 'manifest.json'), 'utf8');
  const manifest = parseManifest(JSON.parse(raw));
  const missing = findMissingFiles(manifest,
    (name) => fs.existsSync(path.join(bundleDir, name)));
  for (const f of missing) {
    console.error(`warning: snippet file missing from bundle: ${f}`);
  }
  return { manifest, missing };
}

function cmdExport(bundleDir: string, assignmentsPath: string, outPath: string): number {
  const { manifest, missing } = loadManifest(bundleDir);
  const spec = JSON.parse(fs.readFileSync(assignmentsPath, 'utf8')) as {
    classes: { name: string; complexity_rank: number }[];
    map: number[];
  };
  const session = createSession(manifest, missing);
  session.palette = spec.classes.map((k) => ({ ...k }));
  spec.map.forEach((classIndex, cluster) => {
    assignCluster(session, cluster, classIndex);
  });
  const errors = validateSession(session);
  if (errors.length > 0) {
    console.error(`assignment rejected: ${errors.join('; ')}`);
    return 1;
  }
  fs.writeFileSync(outPath, serializeMapping(buildMapping(session)));
  return 0;
}

function cmdRoundtrip(bundleDir: string, mappingPath: string, outPath: string): number {
  const { manifest } = loadManifest(bundleDir);
  const mapping = parseMapping(fs.readFileSync(mappingPath, 'utf8'));
  const session = importMapping(manifest, mapping);
  fs.writeFileSync(outPath, serializeMapping(buildMapping(session)));
  return 0;
}

function main(argv: string[]): number {
  const [command, ...rest] = argv;
  if (command === 'export' && rest.length === 3) {
    return cmdExport(rest[0], rest[1], rest[2]);
  }
  if (command === 'roundtrip' && rest.length === 3) {
    return cmdRoundtrip(rest[0], rest[1], rest[2]);
  }
  console.error('usage: export_cli (export|roundtrip) <bundle_dir> <in.json> <out.json>');
  return 2;
}

process.exit(main(process.argv.slice(2)));
