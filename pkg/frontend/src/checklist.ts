/**
 * Client-persisted curriculum completion toggles.
 *
 * The only state that does not round-trip through the service; everything
 * else on screen is server truth.
 */

export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

export class ChecklistStore {
  constructor(private readonly storage: StorageLike) {}

  private key(sessionId: string, fingerprint: string): string {
    return `goai:checklist:${sessionId}:${fingerprint}`;
  }

  completed(sessionId: string, fingerprint: string): Set<string> {
    const raw = this.storage.getItem(this.key(sessionId, fingerprint));
    if (!raw) return new Set();
    try {
      return new Set(JSON.parse(raw) as string[]);
    } catch {
      return new Set();
    }
  }

  toggle(sessionId: string, fingerprint: string, itemName: string): boolean {
    const done = this.completed(sessionId, fingerprint);
    const nowDone = !done.has(itemName);
    if (nowDone) {
      done.add(itemName);
    } else {
      done.delete(itemName);
    }
    this.storage.setItem(this.key(sessionId, fingerprint),
      JSON.stringify([...done].sort()));
    return nowDone;
  }
}

export class MemoryStorage implements StorageLike {
  private items = new Map<string, string>();

  getItem(key: string): string | null {
    return this.items.get(key) ?? null;
  }

  setItem(key: string, value: string): void {
    this.items.set(key, value);
  }
}
