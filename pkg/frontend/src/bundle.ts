/**
 * Bundle-level checks shared by the browser loader and the headless CLI.
 *
 * A bundle is a directory with manifest.json plus one grayscale PNG per
 * representative snippet. Missing snippet files are reported per file but
 * do not block the session from opening.
 */
import { BundleManifest } from './mapping.js';

export function referencedFiles(manifest: BundleManifest): string[] {
  return manifest.clusters.flatMap((c) => c.snippets.map((s) => s.file));
}

/** Names of referenced snippet files the bundle does not actually contain. */
export function findMissingFiles(
  manifest: BundleManifest,
  hasFile: (name: string) => boolean,
): string[] {
  return referencedFiles(manifest).filter((f) => !hasFile(f));
}
