/**
 * Static single-page labelling app. No backend: the operator picks the
 * bundle directory with the file input, reviews one gallery per cluster,
 * builds a class palette, assigns every cluster, and downloads the
 * mapping JSON once validation passes.
 */
import { findMissingFiles } from './bundle.js';
import {
  LabelSession,
  addClass,
  assignCluster,
  buildMapping,
  createSession,
  importMapping,
  parseManifest,
  parseMapping,
  removeClass,
  renameClass,
  serializeMapping,
  setRank,
  validateSession,
} from './mapping.js';

let session: LabelSession | null = null;
let snippetUrls = new Map<string, string>();

const el = (id: string) => document.getElementById(id) as HTMLElement;

function baseName(path: string): string {
  const parts = path.split('/');
  return parts[parts.length - 1];
}

async function loadBundle(files: FileList): Promise<void> {
  const byName = new Map<string, File>();
  for (const f of Array.from(files)) {
    byName.set(baseName(f.webkitRelativePath || f.name), f);
  }
  const manifestFile = byName.get('manifest.json');
  if (!manifestFile) {
    showFatal('no manifest.json in the selected directory');
    return;
  }
  let manifest;
  try {
    manifest = parseManifest(JSON.parse(await manifestFile.text()));
  } catch (err) {
    showFatal(`manifest rejected: ${(err as Error).message}`);
    return;
  }
  for (const url of snippetUrls.values()) URL.revokeObjectURL(url);
  snippetUrls = new Map();
  for (const [name, file] of byName) {
    if (name.endsWith('.png')) snippetUrls.set(name, URL.createObjectURL(file));
  }
  const missing = findMissingFiles(manifest, (name) => snippetUrls.has(name));
  session = createSession(manifest, missing);
  render();
}

function showFatal(message: string): void {
  el('banner').className = 'banner error';
  el('banner').textContent = message;
}

function render(): void {
  if (!session) return;
  renderGalleries();
  renderPalette();
  renderValidation();
}

function renderGalleries(): void {
  const s = session!;
  const host = el('galleries');
  host.textContent = '';
  for (const cluster of s.manifest.clusters) {
    const card = document.createElement('section');
    card.className = 'cluster';

    const head = document.createElement('header');
    head.textContent = `cluster ${cluster.id} — ${cluster.count} snippets`;
    card.appendChild(head);

    const strip = document.createElement('div');
    strip.className = 'strip';
    if (cluster.snippets.length === 0) {
      const empty = document.createElement('em');
      empty.textContent = 'no members';
      strip.appendChild(empty);
    }
    for (const snip of cluster.snippets) {
      const url = snippetUrls.get(snip.file);
      if (!url) {
        const miss = document.createElement('span');
        miss.className = 'missing';
        miss.title = `${snip.file} missing from bundle`;
        miss.textContent = '?';
        strip.appendChild(miss);
        continue;
      }
      const img = document.createElement('img');
      img.src = url;
      img.title = `${snip.file} (d=${snip.distance.toFixed(3)})`;
      strip.appendChild(img);
    }
    card.appendChild(strip);

    const select = document.createElement('select');
    const none = document.createElement('option');
    none.value = '';
    none.textContent = '— unassigned —';
    select.appendChild(none);
    s.palette.forEach((k, i) => {
      const opt = document.createElement('option');
      opt.value = String(i);
      opt.textContent = k.name;
      select.appendChild(opt);
    });
    const current = s.assignments[cluster.id];
    select.value = current === null ? '' : String(current);
    select.onchange = () => {
      assignCluster(s, cluster.id, select.value === '' ? null : Number(select.value));
      renderValidation();
    };
    card.appendChild(select);
    host.appendChild(card);
  }
}

function renderPalette(): void {
  const s = session!;
  const host = el('palette');
  host.textContent = '';
  s.palette.forEach((k, i) => {
    const row = document.createElement('div');
    row.className = 'class-row';

    const name = document.createElement('input');
    name.value = k.name;
    name.onchange = () => {
      renameClass(s, i, name.value);
      render();
    };
    row.appendChild(name);

    const rank = document.createElement('input');
    rank.type = 'number';
    rank.value = String(k.complexity_rank);
    rank.title = 'complexity rank';
    rank.onchange = () => {
      setRank(s, i, Number(rank.value));
      renderValidation();
    };
    row.appendChild(rank);

    const del = document.createElement('button');
    del.textContent = 'remove';
    del.onclick = () => {
      removeClass(s, i);
      render();
    };
    row.appendChild(del);
    host.appendChild(row);
  });
}

function renderValidation(): void {
  const s = session!;
  const banner = el('banner');
  const errors = validateSession(s);
  const lines = [...errors];
  if (s.missingFiles.length > 0) {
    lines.push(`missing snippet files: ${s.missingFiles.join(', ')}`);
  }
  if (errors.length === 0) {
    banner.className = 'banner ok';
    banner.textContent = lines.length ? `ready to export (${lines.join('; ')})`
      : 'ready to export';
  } else {
    banner.className = 'banner error';
    banner.textContent = lines.join(' · ');
  }
  (el('export') as HTMLButtonElement).disabled = errors.length > 0;
}

function download(): void {
  if (!session) return;
  const text = serializeMapping(buildMapping(session));
  const blob = new Blob([text], { type: 'application/json' });
  const a = document.createElement('a');
  a.href = URL.createObjectURL(blob);
  a.download = 'mapping.json';
  a.click();
  URL.revokeObjectURL(a.href);
}

async function importFile(file: File): Promise<void> {
  if (!session) {
    showFatal('load a bundle before importing a mapping');
    return;
  }
  try {
    const mapping = parseMapping(await file.text());
    session = importMapping(session.manifest, mapping);
    session.missingFiles = findMissingFiles(session.manifest,
      (name) => snippetUrls.has(name));
  } catch (err) {
    showFatal(`import rejected: ${(err as Error).message}`);
    return;
  }
  render();
}

export function wire(): void {
  (el('bundle') as HTMLInputElement).onchange = (ev) => {
    const input = ev.target as HTMLInputElement;
    if (input.files) void loadBundle(input.files);
  };
  el('add-class').onclick = () => {
    if (!session) return;
    addClass(session, `class_${session.palette.length}`);
    render();
  };
  el('export').onclick = download;
  (el('import') as HTMLInputElement).onchange = (ev) => {
    const input = ev.target as HTMLInputElement;
    if (input.files && input.files[0]) void importFile(input.files[0]);
  };
}

if (typeof document !== 'undefined' && document.getElementById('bundle')) {
  wire();
}
